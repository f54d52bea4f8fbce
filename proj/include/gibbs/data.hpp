#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gibbs/errors.hpp"
#include "gibbs/parallel.hpp"
#include "gibbs/rng.hpp"
#include "gibbs/types.hpp"

namespace gibbs {

/// Where a dataset came from. Serialized into the cache header and the
/// experiment snapshots.
struct Provenance {
  std::string source;      // "synthetic" or "mnist"
  std::uint64_t seed = 0;  // master seed (synthetic)
  std::uint64_t stream = 0;
  std::string teacher;  // teacher id, e.g. "ones" or "random:3"
  std::string split;    // "train" / "test"
  std::string task;     // "teacher", "parity", "leq5"
};

inline void to_json(nlohmann::json& j, const Provenance& p) {
  j = nlohmann::json{{"source", p.source}, {"seed", p.seed},   {"stream", p.stream},
                     {"teacher", p.teacher}, {"split", p.split}, {"task", p.task}};
}

inline void from_json(const nlohmann::json& j, Provenance& p) {
  p.source = j.value("source", "");
  p.seed = j.value("seed", std::uint64_t{0});
  p.stream = j.value("stream", std::uint64_t{0});
  p.teacher = j.value("teacher", "");
  p.split = j.value("split", "");
  p.task = j.value("task", "");
}

/// Labeled binary dataset: rows of X are samples, y holds -1/+1.
struct Dataset {
  FeatureMatrix X;
  std::vector<Label> y;
  Provenance meta;

  Index size() const noexcept { return X.rows(); }
  Index dim() const noexcept { return X.cols(); }

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw DimensionError("dataset must have N >= 1 and d >= 1");
    if (static_cast<Index>(y.size()) != X.rows())
      throw DimensionError("dataset has " + std::to_string(X.rows()) + " rows but " +
                           std::to_string(y.size()) + " labels");
    if (!std::all_of(y.begin(), y.end(), [](Label l) { return l == 1 || l == -1; }))
      throw std::invalid_argument("dataset labels must be -1 or +1");
    if (!X.allFinite()) throw std::invalid_argument("dataset contains non-finite features");
  }
};

enum class TaskKind { parity, leq5, random_teacher };

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::parity: return "parity";
    case TaskKind::leq5: return "leq5";
    case TaskKind::random_teacher: return "teacher";
  }
  return "?";
}

/// How to turn digits (or raw features) into binary labels.
struct LabelTask {
  TaskKind kind = TaskKind::parity;
  std::optional<std::vector<double>> teacher;

  static LabelTask parity() { return {TaskKind::parity, std::nullopt}; }
  static LabelTask leq5() { return {TaskKind::leq5, std::nullopt}; }
  static LabelTask random_teacher(std::vector<double> w) {
    return {TaskKind::random_teacher, std::move(w)};
  }

  void validate(Index d) const {
    if ((kind == TaskKind::random_teacher) != teacher.has_value())
      throw std::invalid_argument("a teacher vector is required for, and only for, the teacher task");
    if (teacher && static_cast<Index>(teacher->size()) != d)
      throw DimensionError("teacher has dimension " + std::to_string(teacher->size()) +
                           ", features have " + std::to_string(d));
  }
};

/// y_i = sign(teacher . x_i), accumulated in double.
inline std::vector<Label> teacher_labels(const FeatureMatrix& X, std::span<const double> teacher) {
  if (static_cast<Index>(teacher.size()) != X.cols())
    throw DimensionError("teacher dimension does not match features");
  std::vector<Label> y(static_cast<std::size_t>(X.rows()));
  for (Index r = 0; r < X.rows(); ++r) {
    double dot = 0.0;
    for (Index c = 0; c < X.cols(); ++c) dot += static_cast<double>(X(r, c)) * teacher[c];
    y[static_cast<std::size_t>(r)] = sign_label(dot);
  }
  return y;
}

inline Dataset make_gaussian_dataset(SeededStream stream, Index N, Index d,
                                     std::span<const double> teacher, unsigned threads = 1) {
  if (static_cast<Index>(teacher.size()) != d) throw DimensionError("teacher must have length d");
  double sq = 0.0;
  for (double t : teacher) sq += t * t;
  if (!(sq > 0.0)) throw std::invalid_argument("teacher must have positive norm");

  Dataset ds;
  ds.X = gaussian_matrix(stream, N, d, threads);
  ds.y = teacher_labels(ds.X, teacher);
  ds.meta.source = "synthetic";
  ds.meta.seed = stream.master_seed;
  ds.meta.stream = stream.stream_id;
  ds.meta.task = "teacher";
  return ds;
}

inline Label digit_label(std::uint8_t digit, TaskKind kind) {
  switch (kind) {
    case TaskKind::parity: return digit % 2 == 0 ? Label{1} : Label{-1};
    case TaskKind::leq5: return digit <= 5 ? Label{1} : Label{-1};
    case TaskKind::random_teacher: break;
  }
  throw std::invalid_argument("digit_label: teacher task has no digit rule");
}

inline Dataset apply_task(std::span<const std::uint8_t> digits, FeatureMatrix X,
                          const LabelTask& task) {
  if (static_cast<Index>(digits.size()) != X.rows())
    throw DimensionError("digit labels and feature rows differ in count");
  task.validate(X.cols());
  Dataset ds;
  if (task.kind == TaskKind::random_teacher) {
    ds.y = teacher_labels(X, *task.teacher);
  } else {
    ds.y.resize(digits.size());
    std::transform(digits.begin(), digits.end(), ds.y.begin(),
                   [&](std::uint8_t dgt) { return digit_label(dgt, task.kind); });
  }
  ds.X = std::move(X);
  ds.meta.source = "mnist";
  ds.meta.task = to_string(task.kind);
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset cache: <stem>.dsbin holds N*d little-endian float32 (row-major)
// followed by N int8 labels; <stem>.json holds {"format","N","d","provenance"}.

inline constexpr const char* kDsbinFormat = "gibbs-dsbin-1";

namespace detail {
inline std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}
}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::filesystem::path& stem) {
  ds.validate();
  std::filesystem::path bin = stem, hdr = stem;
  bin += ".dsbin";
  hdr += ".json";
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());

  std::ofstream out(bin, std::ios::binary);
  if (!out) throw IoError("cannot open " + bin.string() + " for writing");
  std::vector<std::uint32_t> row(static_cast<std::size_t>(ds.dim()));
  for (Index r = 0; r < ds.size(); ++r) {
    for (Index c = 0; c < ds.dim(); ++c)
      row[static_cast<std::size_t>(c)] = detail::to_little(std::bit_cast<std::uint32_t>(ds.X(r, c)));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
  }
  out.write(reinterpret_cast<const char*>(ds.y.data()), static_cast<std::streamsize>(ds.y.size()));
  if (!out) throw IoError("write failed: " + bin.string());

  nlohmann::json j{{"format", kDsbinFormat}, {"N", ds.size()}, {"d", ds.dim()}, {"provenance", ds.meta}};
  std::ofstream h(hdr);
  if (!h) throw IoError("cannot open " + hdr.string() + " for writing");
  h << j.dump(2) << '\n';
  if (!h) throw IoError("write failed: " + hdr.string());
}

inline Dataset load_dataset(const std::filesystem::path& stem) {
  std::filesystem::path bin = stem, hdr = stem;
  bin += ".dsbin";
  hdr += ".json";
  std::ifstream h(hdr);
  if (!h) throw IoError("cannot open " + hdr.string());
  nlohmann::json j;
  try {
    h >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(hdr.string() + ": " + e.what());
  }
  if (j.value("format", "") != kDsbinFormat) throw FormatError(hdr.string() + ": unknown dataset format");
  const auto N = j.at("N").get<Index>();
  const auto d = j.at("d").get<Index>();
  if (N < 1 || d < 1) throw FormatError(hdr.string() + ": invalid shape");

  std::ifstream in(bin, std::ios::binary);
  if (!in) throw IoError("cannot open " + bin.string());
  const auto expected = static_cast<std::uintmax_t>(N) * static_cast<std::uintmax_t>(d) * 4 +
                        static_cast<std::uintmax_t>(N);
  if (std::filesystem::file_size(bin) != expected)
    throw LengthError(bin.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                      std::to_string(std::filesystem::file_size(bin)));

  Dataset ds;
  ds.X.resize(N, d);
  std::vector<std::uint32_t> row(static_cast<std::size_t>(d));
  for (Index r = 0; r < N; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    for (Index c = 0; c < d; ++c)
      ds.X(r, c) = std::bit_cast<float>(detail::to_little(row[static_cast<std::size_t>(c)]));
  }
  ds.y.resize(static_cast<std::size_t>(N));
  in.read(reinterpret_cast<char*>(ds.y.data()), static_cast<std::streamsize>(N));
  if (!in) throw LengthError(bin.string() + ": truncated");
  ds.meta = j.value("provenance", Provenance{});
  ds.validate();
  return ds;
}

}  // namespace gibbs
