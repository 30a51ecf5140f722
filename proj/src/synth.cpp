#include "flick/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "flick/errors.hpp"
#include "flick/random.hpp"

namespace flick {

namespace {

std::string padded(const char* prefix, std::size_t value, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, value);
  return buf;
}

int digits(std::size_t n) {
  int width = 1;
  while (n >= 10) {
    n /= 10;
    ++width;
  }
  return width;
}

struct BlobSampler {
  const SynthSpec& spec;
  double offset;

  void draw(std::size_t blob, Rng& rng, std::vector<float>& out) const {
    for (std::size_t j = 0; j < spec.dim; ++j) {
      const double center = j == blob ? offset : 0.0;
      out.push_back(static_cast<float>(center + spec.cluster_std * rng.normal()));
    }
  }
};

// Balanced class sequence (i mod Z), shuffled.
std::vector<int> balanced_classes(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<int>(i % classes);
  rng.shuffle(std::span<int>(out));
  return out;
}

LabeledData make_labeled(const char* prefix, std::size_t n, const SynthSpec& spec,
                         const BlobSampler& sampler, const std::vector<std::string>& names,
                         Rng& rng) {
  const auto classes = balanced_classes(n, spec.classes, rng);
  std::vector<std::string> ids;
  std::vector<float> values;
  std::vector<LabelEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(padded(prefix, i, 6));
    sampler.draw(static_cast<std::size_t>(classes[i]), rng, values);
    entries.push_back({ids.back(), classes[i]});
  }
  return {EmbeddingSet(std::move(ids), std::move(values), spec.dim),
          LabelTable(names, std::move(entries))};
}

}  // namespace

void SynthSpec::validate() const {
  if (classes < 2) throw ArgumentError("synth needs at least 2 classes");
  if (dim < classes) throw ArgumentError("synth needs dim >= classes (one axis per center)");
  if (!(cluster_std > 0.0)) throw ArgumentError("cluster_std must be positive");
  if (!(center_separation >= 0.0)) throw ArgumentError("center_separation must be non-negative");
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) {
    throw ArgumentError("noise_fraction must lie in [0, 1]");
  }
  if (n_unlabeled == 0 || n_labeled == 0 || n_heldout == 0) {
    throw ArgumentError("synth split sizes must be positive");
  }
}

SynthData generate_synth(const SynthSpec& spec) {
  spec.validate();
  std::vector<std::string> names;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    names.push_back(padded("class_", c, digits(spec.classes - 1)));
  }
  const BlobSampler sampler{spec, spec.center_separation / std::sqrt(2.0)};

  Rng rng(spec.seed);
  const auto truth = balanced_classes(spec.n_unlabeled, spec.classes, rng);
  const auto swapped = static_cast<std::size_t>(
      std::llround(spec.noise_fraction * static_cast<double>(spec.n_unlabeled)));
  std::vector<std::size_t> order(spec.n_unlabeled);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < swapped; ++i) {
    std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
  }
  std::vector<std::size_t> blob(spec.n_unlabeled);
  for (std::size_t i = 0; i < spec.n_unlabeled; ++i) blob[i] = static_cast<std::size_t>(truth[i]);
  for (std::size_t i = 0; i < swapped; ++i) {
    const std::size_t p = order[i];
    blob[p] = (blob[p] + 1 + rng.uniform_index(spec.classes - 1)) % spec.classes;
  }

  std::vector<std::string> ids;
  std::vector<float> values;
  std::vector<LabelEntry> truth_entries;
  for (std::size_t i = 0; i < spec.n_unlabeled; ++i) {
    ids.push_back(padded("u", i, 6));
    sampler.draw(blob[i], rng, values);
    truth_entries.push_back({ids.back(), truth[i]});
  }

  EmbeddingSet unlabeled(std::move(ids), std::move(values), spec.dim);
  LabelTable unlabeled_truth(names, std::move(truth_entries));
  LabeledData labeled = make_labeled("l", spec.n_labeled, spec, sampler, names, rng);
  LabeledData heldout = make_labeled("h", spec.n_heldout, spec, sampler, names, rng);
  return {std::move(unlabeled), std::move(unlabeled_truth), swapped, std::move(labeled),
          std::move(heldout)};
}

void write_synth(const SynthData& data, const SynthSpec& spec, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_embeddings(data.unlabeled, dir / synth_files::unlabeled);
  write_labels(data.unlabeled_truth, dir / synth_files::unlabeled_truth);
  write_embeddings(data.labeled.embeddings, dir / synth_files::labeled);
  write_labels(data.labeled.labels, dir / synth_files::labeled_labels);
  write_embeddings(data.heldout.embeddings, dir / synth_files::heldout);
  write_labels(data.heldout.labels, dir / synth_files::heldout_labels);

  const nlohmann::json manifest = {{"n_unlabeled", spec.n_unlabeled},
                                   {"n_labeled", spec.n_labeled},
                                   {"n_heldout", spec.n_heldout},
                                   {"classes", spec.classes},
                                   {"dim", spec.dim},
                                   {"cluster_std", spec.cluster_std},
                                   {"center_separation", spec.center_separation},
                                   {"noise_fraction", spec.noise_fraction},
                                   {"swapped", data.swapped},
                                   {"seed", spec.seed}};
  std::ofstream out(dir / synth_files::manifest, std::ios::trunc);
  if (!out) throw IoError("cannot write synth manifest");
  out << manifest.dump(2) << '\n';
}

}  // namespace flick
