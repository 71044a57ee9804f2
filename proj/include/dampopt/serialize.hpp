// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAMPOPT_SERIALIZE_HPP
#define DAMPOPT_SERIALIZE_HPP

#include <string>

#include "dampopt/lyap.hpp"
#include "dampopt/model.hpp"
#include "dampopt/rbm.hpp"

namespace dampopt {

// Structured text document (JSON) with n, masses, stiffness triplets,
// alpha, sparse triplets for B, C, F, the gain map and the bounds box.
// Decimal values round-trip exactly.
void save_system(const SecondOrderSystem& sys, const std::string& path);
SecondOrderSystem load_system(const std::string& path);

std::string system_to_string(const SecondOrderSystem& sys);
SecondOrderSystem system_from_string(const std::string& text);

// Binary basis checkpoint: dims, 64-bit floats, provenance list.
void save_basis(const ReducedBasis& basis, const std::string& path);
ReducedBasis load_basis(const std::string& path);

// Debug dump of a low-rank factor: header with dims, then row-major
// 64-bit floats.
void dump_lowrank(const LowRankFactor& factor, const std::string& path);
LowRankFactor load_lowrank(const std::string& path);

}  // namespace dampopt

#endif  // DAMPOPT_SERIALIZE_HPP
