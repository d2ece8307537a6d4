#include "rca/field_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rca {

namespace {

constexpr int kFormatVersion = 1;

void write_le_doubles(std::ostream &os, double const *data, std::size_t n)
{
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<char const *>(data), static_cast<std::streamsize>(n * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      auto bits = std::bit_cast<std::uint64_t>(data[i]);
      unsigned char buf[8];
      for (int b = 0; b < 8; ++b) { buf[b] = static_cast<unsigned char>(bits >> (8 * b)); }
      os.write(reinterpret_cast<char const *>(buf), 8);
    }
  }
}

void read_le_doubles(std::string const &bytes, double *out, std::size_t n)
{
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out, bytes.data(), n * sizeof(double));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * i + b])) << (8 * b);
      }
      out[i] = std::bit_cast<double>(bits);
    }
  }
}

} // namespace

double distance(Position const &a, Position const &b) { return std::hypot(a.x - b.x, a.y - b.y); }

void check_distinct(std::vector<Position> const &positions)
{
  double diameter = 0.0;
  for (auto const &u : positions) {
    if (!std::isfinite(u.x) || !std::isfinite(u.y)) { throw DataError("non-finite position"); }
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      diameter = std::max(diameter, distance(positions[i], positions[j]));
    }
  }
  double const guard = 1e-9 * diameter;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      double const d = distance(positions[i], positions[j]);
      if (d <= guard || d == 0.0) {
        throw DataError("coincident positions at indices " + std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }
}

void ObservationStack::validate() const
{
  if (patch_shape.rows <= 0 || patch_shape.cols <= 0) { throw DataError("patch shape must be positive"); }
  if (patch_shape.size() != Y.rows()) {
    throw DataError("patch shape " + std::to_string(patch_shape.rows) + "x" + std::to_string(patch_shape.cols) +
                    " inconsistent with " + std::to_string(Y.rows()) + " pixels per patch");
  }
  if (static_cast<Eigen::Index>(positions.size()) != Y.cols()) {
    throw DataError("shape mismatch: " + std::to_string(positions.size()) + " positions for " +
                    std::to_string(Y.cols()) + " patches");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) { throw DataError("noise_sigma must be finite and >= 0"); }
  if (!Y.allFinite()) { throw DataError("non-finite pixel value"); }
  check_distinct(positions);
}

Matrix weights_from_code(Matrix const &alpha, Matrix const &V)
{
  if (alpha.cols() != V.cols()) { throw DataError("alpha and V column counts differ"); }
  return alpha * V.transpose();
}

PsfMatrix reconstruct(Factorization const &f, Shape hr_shape)
{
  if (f.S.cols() != f.alpha.rows()) { throw DataError("S columns must match alpha rows"); }
  if (f.alpha.cols() != f.V.cols()) { throw DataError("alpha columns must match V columns"); }
  if (hr_shape.size() != f.S.rows()) { throw DataError("hr_shape inconsistent with S rows"); }
  return PsfMatrix{f.S * weights_from_code(f.alpha, f.V), hr_shape};
}

void normalize_rows(Matrix &A, Matrix &alpha)
{
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double const n = A.row(i).norm();
    if (n > 0.0) {
      A.row(i) /= n;
      if (alpha.rows() == A.rows()) { alpha.row(i) /= n; }
    }
  }
}

ObservationStack load_dataset(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw DataError("cannot open dataset " + path.string()); }
  std::string header;
  if (!std::getline(in, header)) { throw DataError("missing dataset header"); }

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (nlohmann::json::exception const &e) {
    throw DataError(std::string("malformed header: ") + e.what());
  }

  ObservationStack stack;
  std::size_t p = 0;
  try {
    if (h.at("version").get<int>() != kFormatVersion) { throw DataError("unsupported dataset version"); }
    p = h.at("p").get<std::size_t>();
    stack.patch_shape = {h.at("patch_rows").get<int>(), h.at("patch_cols").get<int>()};
    stack.noise_sigma = h.at("noise_sigma").get<double>();
    for (auto const &u : h.at("positions")) {
      if (!u.is_array() || u.size() != 2) { throw DataError("malformed header: position must be [x, y]"); }
      stack.positions.push_back({u[0].get<double>(), u[1].get<double>()});
    }
  } catch (nlohmann::json::exception const &e) {
    throw DataError(std::string("malformed header: ") + e.what());
  }
  if (stack.patch_shape.rows <= 0 || stack.patch_shape.cols <= 0) { throw DataError("malformed header: patch shape"); }
  if (stack.positions.size() != p) {
    throw DataError("shape mismatch: header p=" + std::to_string(p) + " but " +
                    std::to_string(stack.positions.size()) + " positions");
  }

  std::string const payload{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::size_t const n_y = static_cast<std::size_t>(stack.patch_shape.size());
  std::size_t const expected = n_y * p * sizeof(double);
  if (payload.size() != expected) {
    throw DataError("shape mismatch: payload holds " + std::to_string(payload.size() / (n_y * sizeof(double))) +
                    " patches, header declares " + std::to_string(p));
  }
  stack.Y.resize(static_cast<Eigen::Index>(n_y), static_cast<Eigen::Index>(p));
  read_le_doubles(payload, stack.Y.data(), n_y * p);
  stack.validate();
  return stack;
}

void save_dataset(ObservationStack const &stack, std::filesystem::path const &path)
{
  stack.validate();
  nlohmann::json h;
  h["version"] = kFormatVersion;
  h["p"] = stack.count();
  h["patch_rows"] = stack.patch_shape.rows;
  h["patch_cols"] = stack.patch_shape.cols;
  h["noise_sigma"] = stack.noise_sigma;
  auto positions = nlohmann::json::array();
  for (auto const &u : stack.positions) { positions.push_back({u.x, u.y}); }
  h["positions"] = positions;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw DataError("cannot write dataset " + path.string()); }
  out << h.dump() << '\n';
  write_le_doubles(out, stack.Y.data(), static_cast<std::size_t>(stack.Y.size()));
  if (!out) { throw DataError("write failed for " + path.string()); }
}

} // namespace rca
