#pragma once

#include <cstdint>
#include <vector>

namespace resure {

// Running loss statistics for one turn group, accumulated with Welford's
// single-pass update. `ssd` is the sum of squared deviations from the
// current mean; variance is ssd/(count-1). Everything is kept in double
// regardless of the training precision: the cancellation step is
// precision-sensitive.
struct GroupStats {
    std::uint64_t count = 0;
    double mean = 0.0;
    double ssd = 0.0;

    // Absorb one reliable loss value. Throws ValueError for non-finite or
    // negative input.
    void absorb(double loss);

    // Sample variance; 0 while count < 2.
    double variance() const;

    // Sample standard deviation; 0 while count < 2, so the threshold
    // degenerates to the mean until the cell matures.
    double stddev() const;

    // Anomaly threshold tau = mean + alpha * stddev.
    double threshold(double alpha) const;
};

// One statistics cell per turn group b in 1..N. Single-writer: absorb is
// called from one training thread; snapshot reads happen between steps.
class StatsRegistry {
public:
    explicit StatsRegistry(int max_groups);

    // Welford-update the cell for `group`, returning it. Throws
    // GroupIndexError when group is outside 1..N.
    const GroupStats& absorb(int group, double loss);

    const GroupStats& cell(int group) const;

    int max_groups() const { return static_cast<int>(cells_.size()); }

private:
    std::vector<GroupStats> cells_;
};

}  // namespace resure
