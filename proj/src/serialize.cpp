// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dampopt/serialize.hpp"

#include <fstream>

#include <json.hpp>

namespace dampopt {
namespace {

using nlohmann::json;

json triplets(const Matrix& A) {
  json arr = json::array();
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (A(i, j) != 0.0) arr.push_back({i, j, A(i, j)});
  return arr;
}

Matrix from_triplets(const json& arr, Eigen::Index rows, Eigen::Index cols) {
  Matrix A = Matrix::Zero(rows, cols);
  for (const auto& t : arr) {
    const Eigen::Index i = t.at(0).get<Eigen::Index>();
    const Eigen::Index j = t.at(1).get<Eigen::Index>();
    if (i < 0 || i >= rows || j < 0 || j >= cols)
      throw IoError("system file: triplet index out of range");
    A(i, j) = t.at(2).get<double>();
  }
  return A;
}

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw IoError("checkpoint: truncated file");
  return v;
}

void write_matrix(std::ostream& os, const Matrix& A) {
  write_u64(os, static_cast<std::uint64_t>(A.rows()));
  write_u64(os, static_cast<std::uint64_t>(A.cols()));
  os.write(reinterpret_cast<const char*>(A.data()),
           static_cast<std::streamsize>(sizeof(double) * A.size()));
}

Matrix read_matrix(std::istream& is) {
  const auto rows = static_cast<Eigen::Index>(read_u64(is));
  const auto cols = static_cast<Eigen::Index>(read_u64(is));
  Matrix A(rows, cols);
  is.read(reinterpret_cast<char*>(A.data()),
          static_cast<std::streamsize>(sizeof(double) * A.size()));
  if (!is) throw IoError("checkpoint: truncated matrix payload");
  return A;
}

constexpr std::uint64_t kBasisMagic = 0x64616d70'62617331ULL;   // "dampbas1"
constexpr std::uint64_t kFactorMagic = 0x64616d70'666163'31ULL;

}  // namespace

std::string system_to_string(const SecondOrderSystem& sys) {
  json doc;
  doc["format"] = "dampopt-system";
  doc["version"] = 1;
  doc["n"] = sys.n();
  doc["alpha"] = sys.alpha();
  if (sys.mass_is_diagonal()) {
    json masses = json::array();
    for (Eigen::Index i = 0; i < sys.n(); ++i) masses.push_back(sys.M()(i, i));
    doc["masses"] = masses;
  } else {
    doc["mass_triplets"] = triplets(sys.M());
  }
  doc["stiffness_triplets"] = triplets(sys.K());
  doc["num_inputs"] = sys.num_inputs();
  doc["num_outputs"] = sys.num_outputs();
  doc["num_dampers"] = sys.num_dampers();
  doc["input_triplets"] = triplets(sys.B());
  doc["output_triplets"] = triplets(sys.C());
  doc["damper_triplets"] = triplets(sys.F());
  doc["gain_map"] = sys.gain_map();
  json bounds = json::array();
  for (const auto& b : sys.bounds()) bounds.push_back({b.lower, b.upper});
  doc["bounds"] = bounds;
  return doc.dump(2);
}

SecondOrderSystem system_from_string(const std::string& text) {
  json doc = json::parse(text);
  if (doc.value("format", "") != "dampopt-system")
    throw IoError("system file: unrecognized format tag");
  const auto n = doc.at("n").get<Eigen::Index>();
  Matrix M;
  if (doc.contains("masses")) {
    M = Matrix::Zero(n, n);
    const auto& masses = doc.at("masses");
    if (static_cast<Eigen::Index>(masses.size()) != n)
      throw IoError("system file: mass array length mismatch");
    for (Eigen::Index i = 0; i < n; ++i) M(i, i) = masses[static_cast<std::size_t>(i)].get<double>();
  } else {
    M = from_triplets(doc.at("mass_triplets"), n, n);
  }
  Matrix K = from_triplets(doc.at("stiffness_triplets"), n, n);
  const auto m = doc.at("num_inputs").get<Eigen::Index>();
  const auto p = doc.at("num_outputs").get<Eigen::Index>();
  const auto l = doc.at("num_dampers").get<Eigen::Index>();
  Matrix B = from_triplets(doc.at("input_triplets"), n, m);
  Matrix C = from_triplets(doc.at("output_triplets"), p, n);
  Matrix F = from_triplets(doc.at("damper_triplets"), n, l);
  std::vector<int> gain_map = doc.at("gain_map").get<std::vector<int>>();
  BoundsBox bounds;
  for (const auto& b : doc.at("bounds")) bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  return SecondOrderSystem(std::move(M), std::move(K), doc.at("alpha").get<double>(), std::move(B),
                           std::move(C), std::move(F), std::move(bounds), std::move(gain_map));
}

void save_system(const SecondOrderSystem& sys, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << system_to_string(sys) << '\n';
}

SecondOrderSystem load_system(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return system_from_string(text);
}

void save_basis(const ReducedBasis& basis, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_u64(os, kBasisMagic);
  write_u64(os, basis.includes_undamped ? 1 : 0);
  write_matrix(os, basis.V1);
  write_matrix(os, basis.V1err);
  write_u64(os, basis.used_params.size());
  for (const auto& g : basis.used_params) write_matrix(os, g.values);
  write_u64(os, basis.used_residual_params.size());
  for (const auto& g : basis.used_residual_params) write_matrix(os, g.values);
}

ReducedBasis load_basis(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  if (read_u64(is) != kBasisMagic) throw IoError("basis checkpoint: bad magic");
  ReducedBasis basis;
  basis.includes_undamped = read_u64(is) != 0;
  basis.V1 = read_matrix(is);
  basis.V1err = read_matrix(is);
  const auto np = read_u64(is);
  for (std::uint64_t i = 0; i < np; ++i) basis.used_params.emplace_back(Vector(read_matrix(is)));
  const auto nr = read_u64(is);
  for (std::uint64_t i = 0; i < nr; ++i)
    basis.used_residual_params.emplace_back(Vector(read_matrix(is)));
  return basis;
}

void dump_lowrank(const LowRankFactor& factor, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_u64(os, kFactorMagic);
  write_u64(os, static_cast<std::uint64_t>(factor.half_dim));
  write_u64(os, static_cast<std::uint64_t>(factor.Z.rows()));
  write_u64(os, static_cast<std::uint64_t>(factor.Z.cols()));
  // row-major payload
  for (Eigen::Index i = 0; i < factor.Z.rows(); ++i)
    for (Eigen::Index j = 0; j < factor.Z.cols(); ++j) {
      const double v = factor.Z(i, j);
      os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

LowRankFactor load_lowrank(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  if (read_u64(is) != kFactorMagic) throw IoError("factor dump: bad magic");
  LowRankFactor f;
  f.half_dim = static_cast<Eigen::Index>(read_u64(is));
  const auto rows = static_cast<Eigen::Index>(read_u64(is));
  const auto cols = static_cast<Eigen::Index>(read_u64(is));
  f.Z.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      double v;
      is.read(reinterpret_cast<char*>(&v), sizeof(v));
      if (!is) throw IoError("factor dump: truncated payload");
      f.Z(i, j) = v;
    }
  return f;
}

}  // namespace dampopt
