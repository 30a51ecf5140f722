#include "flick/ingestion.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

#include "flick/errors.hpp"
#include "flick/random.hpp"
#include "json.hpp"

namespace flick {

__extension__ typedef unsigned __int128 Wide;

namespace {

constexpr std::array<char, 4> kMagic = {'F', 'L', 'K', 'E'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw FormatError(std::string("FLKE: truncated while reading ") + what);
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

}  // namespace

EmbeddingSet::EmbeddingSet(std::vector<std::string> ids, std::vector<float> values,
                           std::size_t dim)
    : ids_(std::move(ids)), values_(std::move(values)), dim_(dim) {
  if (ids_.empty()) throw DataError("embedding set is empty");
  if (dim_ == 0) throw DataError("embedding dimension must be positive");
  if (values_.size() != ids_.size() * dim_) {
    throw DataError("embedding value count " + std::to_string(values_.size()) +
                    " does not match n*d = " + std::to_string(ids_.size() * dim_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DataError("non-finite embedding value in row " + std::to_string(i / dim_) +
                      " (id '" + ids_[i / dim_] + "')");
    }
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw DataError("duplicate embedding id '" + ids_[i] + "'");
    }
  }
}

std::optional<std::size_t> EmbeddingSet::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingSet EmbeddingSet::subset(std::span<const std::size_t> rows) const {
  std::vector<std::string> ids;
  std::vector<float> values;
  ids.reserve(rows.size());
  values.reserve(rows.size() * dim_);
  for (std::size_t r : rows) {
    if (r >= size()) throw ArgumentError("row index out of range in subset");
    ids.push_back(ids_[r]);
    auto src = row(r);
    values.insert(values.end(), src.begin(), src.end());
  }
  return EmbeddingSet(std::move(ids), std::move(values), dim_);
}

Matrix EmbeddingSet::to_matrix() const {
  Matrix m(size(), dim_);
  std::copy(values_.begin(), values_.end(), m.values.begin());
  return m;
}

Matrix EmbeddingSet::rows_matrix(std::span<const std::size_t> rows) const {
  Matrix m(rows.size(), dim_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw ArgumentError("row index out of range");
    auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }
  return m;
}

bool bit_equal(const EmbeddingSet& a, const EmbeddingSet& b) {
  return a.dim() == b.dim() && a.ids() == b.ids() &&
         a.values().size() == b.values().size() &&
         std::memcmp(a.values().data(), b.values().data(),
                     a.values().size() * sizeof(float)) == 0;
}

LabelTable::LabelTable(std::vector<std::string> class_names,
                       std::vector<LabelEntry> entries)
    : class_names_(std::move(class_names)), entries_(std::move(entries)) {
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.label < 0 || static_cast<std::size_t>(e.label) >= class_names_.size()) {
      throw DataError("label index " + std::to_string(e.label) + " for id '" + e.id +
                      "' outside class range");
    }
    if (!index_.emplace(e.id, i).second) {
      throw DataError("duplicate label id '" + e.id + "'");
    }
  }
}

LabelTable LabelTable::from_named(
    const std::vector<std::pair<std::string, std::string>>& id_and_name) {
  std::vector<std::string> names;
  names.reserve(id_and_name.size());
  for (const auto& [id, name] : id_and_name) names.push_back(name);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());

  std::vector<LabelEntry> entries;
  entries.reserve(id_and_name.size());
  for (const auto& [id, name] : id_and_name) {
    auto pos = std::lower_bound(names.begin(), names.end(), name);
    entries.push_back({id, static_cast<int>(pos - names.begin())});
  }
  return LabelTable(std::move(names), std::move(entries));
}

std::optional<int> LabelTable::label_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second].label;
}

std::vector<std::size_t> LabelTable::class_sizes() const {
  std::vector<std::size_t> sizes(class_names_.size(), 0);
  for (const auto& e : entries_) ++sizes[static_cast<std::size_t>(e.label)];
  return sizes;
}

std::string_view to_string(FewLabelMode mode) {
  return mode == FewLabelMode::total_count ? "total-count" : "per-class-shots";
}

FewLabelMode parse_few_label_mode(std::string_view text) {
  if (text == "total-count") return FewLabelMode::total_count;
  if (text == "per-class-shots") return FewLabelMode::per_class_shots;
  throw ArgumentError("unknown few-label mode '" + std::string(text) + "'");
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings file " + path.string());

  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("FLKE: bad magic header in " + path.string());
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw FormatError("FLKE: unsupported version " + std::to_string(version));
  }
  const auto n = get_le<std::uint64_t>(in, "row count");
  const auto d = get_le<std::uint32_t>(in, "dimension");
  if (n == 0) throw DataError("FLKE: empty embedding set in " + path.string());
  if (d == 0) throw FormatError("FLKE: zero dimension");

  // Guard the allocation below against corrupt headers.
  const auto start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto remaining = static_cast<std::uint64_t>(in.tellg() - start);
  in.seekg(start);
  if (n > remaining / (4 + 4ull * d)) {
    throw FormatError("FLKE: header claims more rows than the file holds");
  }

  std::vector<std::string> ids(n);
  for (auto& id : ids) {
    const auto len = get_le<std::uint32_t>(in, "id length");
    if (len > remaining) throw FormatError("FLKE: id length exceeds file size");
    id.resize(len);
    if (len > 0 && !in.read(id.data(), len)) {
      throw FormatError("FLKE: truncated id block");
    }
  }

  std::vector<float> values(n * d);
  for (auto& v : values) {
    v = std::bit_cast<float>(get_le<std::uint32_t>(in, "values"));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("FLKE: trailing bytes after value block");
  }
  return EmbeddingSet(std::move(ids), std::move(values), d);
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, set.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  for (const auto& id : set.ids()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (float v : set.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

LabelTable load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file " + path.string());

  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": invalid JSON: " + e.what());
    }
    if (!record.is_object()) throw FormatError(where + ": expected a JSON object");
    for (const char* field : {"id", "label"}) {
      if (!record.contains(field) || !record[field].is_string()) {
        throw FormatError(where + ": missing string field '" + field + "'");
      }
    }
    rows.emplace_back(record["id"].get<std::string>(), record["label"].get<std::string>());
  }
  return LabelTable::from_named(rows);
}

void write_labels(const LabelTable& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& e : labels.entries()) {
    nlohmann::json record = {{"id", e.id},
                             {"label", labels.class_names()[static_cast<std::size_t>(e.label)]}};
    out << record.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::size_t> proportional_quotas(std::span<const std::size_t> class_sizes,
                                             std::size_t count) {
  const std::size_t total =
      std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  if (count > total) {
    throw ArgumentError("requested " + std::to_string(count) + " samples but only " +
                        std::to_string(total) + " are available");
  }
  const std::size_t z = class_sizes.size();
  std::vector<std::size_t> quota(z, 0);
  if (total == 0) return quota;

  // Largest remainder: floor(count*s/N), then hand out the leftovers by
  // remainder descending, lower class index first on ties.
  std::vector<std::size_t> remainder(z, 0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < z; ++c) {
    const auto scaled = static_cast<Wide>(count) * class_sizes[c];
    quota[c] = static_cast<std::size_t>(scaled / total);
    remainder[c] = static_cast<std::size_t>(scaled % total);
    assigned += quota[c];
  }
  std::vector<std::size_t> order(z);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < count; ++i, ++assigned) ++quota[order[i]];

  std::size_t nonempty = 0;
  for (std::size_t s : class_sizes) nonempty += s > 0 ? 1 : 0;
  if (count < nonempty) return quota;

  // Every non-empty class gets at least one; the donor is the class holding
  // the largest surplus over its exact share.
  auto surplus = [&](std::size_t c) {
    return static_cast<double>(quota[c]) -
           static_cast<double>(count) * static_cast<double>(class_sizes[c]) /
               static_cast<double>(total);
  };
  for (std::size_t c = 0; c < z; ++c) {
    if (class_sizes[c] == 0 || quota[c] > 0) continue;
    std::size_t donor = z;
    for (std::size_t o = 0; o < z; ++o) {
      if (o == c || quota[o] < 2) continue;
      if (donor == z || surplus(o) > surplus(donor)) donor = o;
    }
    if (donor == z) break;
    --quota[donor];
    quota[c] = 1;
  }
  return quota;
}

FewLabelSample subsample_few_labels(const LabelTable& labels, FewLabelMode mode,
                                    std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ArgumentError("few-label count must be at least 1");

  const std::size_t z = labels.class_count();
  std::vector<std::vector<std::size_t>> members(z);
  for (std::size_t i = 0; i < labels.entries().size(); ++i) {
    members[static_cast<std::size_t>(labels.entries()[i].label)].push_back(i);
  }

  std::vector<std::size_t> quota(z);
  if (mode == FewLabelMode::total_count) {
    quota = proportional_quotas(labels.class_sizes(), count);
  } else {
    for (std::size_t c = 0; c < z; ++c) quota[c] = std::min(count, members[c].size());
  }

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < z; ++c) {
    auto& pool = members[c];
    // Partial Fisher-Yates: the first quota[c] slots become the sample.
    for (std::size_t i = 0; i < quota[c]; ++i) {
      std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(chosen.begin(), chosen.end());

  FewLabelSample sample;
  sample.mode = mode;
  sample.count = count;
  sample.ids.reserve(chosen.size());
  for (std::size_t i : chosen) sample.ids.push_back(labels.entries()[i].id);
  return sample;
}

}  // namespace flick
