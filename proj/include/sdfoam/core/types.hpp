// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sdfoam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Error categories raised across the library. Each maps to a named failure
/// mode of one of the modules; callers switch on `Error::code()`.
enum class Errc {
  DegenerateInput,
  DuplicatePoint,
  UnknownId,
  NotAnEdge,
  EmptyBatch,
  TraversalOverflow,
  TapeConsumed,
  ShapeMismatch,
  UnknownGroup,
  NonFiniteGradient,
  EmptyResult,
  MissingFile,
  BadManifest,
  ResolutionMismatch,
  IoError,
  VersionMismatch,
  CorruptSection,
  EmptyMesh,
  InvalidArgument,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::DuplicatePoint: return "DuplicatePoint";
    case Errc::UnknownId: return "UnknownId";
    case Errc::NotAnEdge: return "NotAnEdge";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::TraversalOverflow: return "TraversalOverflow";
    case Errc::TapeConsumed: return "TapeConsumed";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::UnknownGroup: return "UnknownGroup";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::EmptyResult: return "EmptyResult";
    case Errc::MissingFile: return "MissingFile";
    case Errc::BadManifest: return "BadManifest";
    case Errc::ResolutionMismatch: return "ResolutionMismatch";
    case Errc::IoError: return "IoError";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptSection: return "CorruptSection";
    case Errc::EmptyMesh: return "EmptyMesh";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace sdfoam
