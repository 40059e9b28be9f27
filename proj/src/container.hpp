#pragma once

#include <cstdint>
#include <string>

#include "control_variates.hpp"
#include "regression.hpp"
#include "schemes.hpp"

namespace weakcv {

/// Versioned binary container shared by the three persistable artifact
/// types. Layout: 4 magic bytes "WCVB", u32 format version, u32 kind, then
/// a kind-specific payload. All integers and IEEE doubles are stored
/// little-endian; strings and arrays carry a u64 length prefix. Ids are
/// stored together with their FNV-1a hash as an integrity stamp.
///
/// Loading validates magic, version, kind, hashes and size invariants and
/// raises a configuration error on any mismatch. Function-valued members
/// are never serialised: a loaded RegressionEstimate with a payoff column
/// needs bind_payoff() and a loaded CvModel needs bind_model() before
/// evaluation (derived tables are rebuilt automatically on load).
enum class ContainerKind : std::uint32_t {
  path_bundle = 1,
  regression_estimate = 2,
  cv_model = 3,
};

constexpr std::uint32_t kContainerVersion = 1;

void save_bundle(const std::string& path, const PathBundle& bundle);
PathBundle load_bundle(const std::string& path);

void save_estimate(const std::string& path, const RegressionEstimate& est);
RegressionEstimate load_estimate(const std::string& path);

void save_cv_model(const std::string& path, const CvModel& cv);
CvModel load_cv_model(const std::string& path);

/// Reads just the header and reports what the file holds.
ContainerKind peek_kind(const std::string& path);

}  // namespace weakcv
