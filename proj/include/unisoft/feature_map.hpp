#pragma once

#include <vector>

#include <Eigen/Dense>

namespace unisoft {

/// Per-stage feature vectors phi_h(s, a) with stage-dependent dimensions.
///
/// phi[h] stores one feature vector per row, indexed by the flattened pair
/// sa = s * num_actions + a.
struct FeatureMap {
    std::vector<int> dims;               // [h] -> d_h
    std::vector<Eigen::MatrixXd> phi;    // [h] -> (S*A) x d_h
    int num_states = 0;
    int num_actions = 0;

    int horizon() const { return static_cast<int>(dims.size()); }

    Eigen::VectorXd vec(int h, int s, int a) const {
        return phi[h].row(s * num_actions + a).transpose();
    }

    /// Shape consistency; throws std::invalid_argument on mismatch.
    void validate() const;

    /// True when every feature satisfies the unit-ball norm convention
    /// ||phi||_2 <= 1 + 1e-9.
    bool within_unit_ball() const;
};

}  // namespace unisoft
