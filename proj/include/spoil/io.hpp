#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "spoil/mdp.hpp"

namespace spoil {

/// Real formatted with 17 significant digits (exact double round trip).
std::string format_real(double v);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// MDP text format:
//   mdp n_states n_actions gamma
//   nu0 p_0 ... p_{|X|-1}
//   x a r(x,a) p(0|x,a) ... p(|X|-1|x,a)      one line per (x,a)
void write_mdp(std::ostream& out, const FiniteMdp& mdp);
FiniteMdp read_mdp(std::istream& in);
std::string serialize_mdp(const FiniteMdp& mdp);
/// Hash of the serialized form; identifies an environment in dataset headers.
std::string mdp_hash(const FiniteMdp& mdp);

// Feature sidecar: one line per (x,a): `x a phi_1 ... phi_d`.
void write_features(std::ostream& out, const FeatureMap& features);
/// The dimension is taken from the first line.
FeatureMap read_features(std::istream& in, std::size_t n_states, std::size_t n_actions);

// Policy logits: one line per state with A reals.
void write_policy(std::ostream& out, const Policy& pi);
Policy read_policy(std::istream& in);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace spoil
