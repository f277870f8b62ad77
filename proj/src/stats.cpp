#include "resure/stats.hpp"

#include <cmath>

#include "resure/errors.hpp"
#include "resure/util.hpp"

namespace resure {

void GroupStats::absorb(double loss) {
    if (!std::isfinite(loss)) {
        throw ValueError("absorb: loss must be finite");
    }
    if (loss < 0.0) {
        throw ValueError("absorb: loss must be >= 0, got " + fmt_double(loss));
    }
    count += 1;
    const double mean_old = mean;
    mean = mean_old + (loss - mean_old) / static_cast<double>(count);
    ssd = ssd + (loss - mean_old) * (loss - mean);
    // Floating-point cancellation can leave a tiny negative residue.
    if (ssd < 0.0) ssd = 0.0;
}

double GroupStats::variance() const {
    if (count < 2) return 0.0;
    return ssd / static_cast<double>(count - 1);
}

double GroupStats::stddev() const {
    return std::sqrt(variance());
}

double GroupStats::threshold(double alpha) const {
    return mean + alpha * stddev();
}

StatsRegistry::StatsRegistry(int max_groups) {
    if (max_groups < 1) {
        throw ValueError("StatsRegistry: max_groups must be >= 1");
    }
    cells_.resize(static_cast<std::size_t>(max_groups));
}

const GroupStats& StatsRegistry::absorb(int group, double loss) {
    if (group < 1 || group > max_groups()) {
        throw GroupIndexError("group " + std::to_string(group) + " outside 1.." +
                              std::to_string(max_groups()));
    }
    GroupStats& cell = cells_[static_cast<std::size_t>(group - 1)];
    cell.absorb(loss);
    return cell;
}

const GroupStats& StatsRegistry::cell(int group) const {
    if (group < 1 || group > max_groups()) {
        throw GroupIndexError("group " + std::to_string(group) + " outside 1.." +
                              std::to_string(max_groups()));
    }
    return cells_[static_cast<std::size_t>(group - 1)];
}

}  // namespace resure
