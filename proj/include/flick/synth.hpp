#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "flick/ingestion.hpp"
#include "flick/pipeline.hpp"

namespace flick {

/// Gaussian-blob fixture. Class c is centered at (separation / sqrt 2) * e_c,
/// so every pair of centers is `separation` apart.
struct SynthSpec {
  std::size_t n_unlabeled = 2000;
  std::size_t n_labeled = 100;
  std::size_t n_heldout = 600;
  std::size_t classes = 3;
  std::size_t dim = 32;
  double cluster_std = 0.5;
  double center_separation = 10.0;
  /// Fraction of unlabeled points drawn from a blob other than their class's.
  double noise_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  EmbeddingSet unlabeled;
  LabelTable unlabeled_truth;  // generating class, not the blob actually drawn from
  std::size_t swapped = 0;
  LabeledData labeled;
  LabeledData heldout;
};

SynthData generate_synth(const SynthSpec& spec);

/// File names used inside a fixture directory.
namespace synth_files {
inline constexpr const char* unlabeled = "unlabeled.flke";
inline constexpr const char* unlabeled_truth = "unlabeled_truth.jsonl";
inline constexpr const char* labeled = "labeled.flke";
inline constexpr const char* labeled_labels = "labeled.jsonl";
inline constexpr const char* heldout = "heldout.flke";
inline constexpr const char* heldout_labels = "heldout.jsonl";
inline constexpr const char* manifest = "synth.json";
}  // namespace synth_files

void write_synth(const SynthData& data, const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace flick
