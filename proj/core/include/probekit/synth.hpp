#pragma once

// Two-class Gaussian activations for oracle testing. Class means sit at
// +/- delta_mu / 2; isotropic noise of scale sigma is added, plus optional
// high-variance nuisance directions that carry no label information.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probekit/activation_store.hpp"

namespace probekit {

struct SyntheticSpec {
  std::string dataset = "synth";
  std::string model_id = "synthetic";
  std::uint32_t d = 64;
  std::uint32_t n_per_class = 2000;
  // One entry: magnitude along a random unit direction. d entries: the
  // explicit mean difference for layer 0.
  std::vector<double> delta_mu{2.0};
  double noise_sigma = 1.0;
  std::uint32_t nuisance_dims = 0;
  double nuisance_scale = 3.0;  // nuisance std as a multiple of sigma
  std::uint32_t n_layers = 1;
  // Per-layer multiplier on delta_mu; empty means 1 for every layer.
  std::vector<double> layer_gain;
  // Samples, labels and nuisance directions.
  std::uint64_t seed = 0;
  // Signal directions (and their per-layer rotations); sharing this between
  // two datasets gives them the same true direction.
  std::uint64_t direction_seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  DatasetMeta meta;
  // files[layer][split] for split in train, validation, test.
  std::vector<std::array<ActivationFile, 3>> files;
  // True mean difference per layer (after gain).
  std::vector<Eigen::VectorXd> delta_mu;
};

// 70/10/20 train/validation/test split over a seeded shuffle.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Writes `<dataset>__meta.json` and every `<dataset>__<split>__L<layer>.rqac`
// into `dir`. Returns the written paths.
std::vector<std::string> write_synthetic(const SyntheticDataset& data, const std::string& dir);

}  // namespace probekit
