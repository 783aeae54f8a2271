#pragma once

#include <string>

#include <Eigen/Dense>

namespace gridlearn {

/// Per-PQ-bus active/reactive load vectors (per-unit) at one time point, in
/// the network's canonical PQ order. Negative entries are allowed (wind
/// modeled as negative load). `tag` carries timestamp/provenance, may be
/// empty.
struct LoadScenario {
  Eigen::VectorXd p_load;
  Eigen::VectorXd q_load;
  std::string tag;
};

}  // namespace gridlearn
