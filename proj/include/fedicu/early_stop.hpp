#pragma once

#include <limits>

#include "fedicu/errors.hpp"

namespace fedicu {

// Patience-based early stopping on a monitored loss. Strict improvement
// resets the counter; `patience` consecutive non-improving observations stop
// the run. Tracks the best observation (0-based index) for weight restoration.
class EarlyStopper {
  public:
    explicit EarlyStopper(int patience) : patience_(patience) {
        if (patience < 1) throw ConfigError("early stopping patience must be >= 1");
    }

    // Returns true when training should stop after this observation.
    bool observe(double loss) {
        ++count_;
        if (loss < best_loss_) {
            best_loss_ = loss;
            best_index_ = count_ - 1;
            since_best_ = 0;
            last_improved_ = true;
        } else {
            ++since_best_;
            last_improved_ = false;
        }
        return since_best_ >= patience_;
    }

    bool last_improved() const { return last_improved_; }
    int best_index() const { return best_index_; }
    double best_loss() const { return best_loss_; }

  private:
    int patience_;
    int count_ = 0;
    int best_index_ = -1;
    int since_best_ = 0;
    double best_loss_ = std::numeric_limits<double>::infinity();
    bool last_improved_ = false;
};

}  // namespace fedicu
