#pragma once

#include <stdexcept>
#include <string>

namespace risisac {

/// Rejected input: bad values passed to an operation (non-finite angles,
/// nonpositive distances, malformed scenario files, ...).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Structural error: dimension mismatches and broken data-structure
/// preconditions (non-Hermitian covariance, layout violations, ...).
class StructuralError : public std::logic_error {
 public:
  explicit StructuralError(const std::string& what) : std::logic_error(what) {}
};

/// The Fisher information at the requested point is numerically singular,
/// so no finite bound on the estimation covariance exists.
class UnboundedCrbError : public std::runtime_error {
 public:
  explicit UnboundedCrbError(const std::string& what) : std::runtime_error(what) {}
};

/// No beamformer satisfies the rate/power constraints for this scenario.
class InfeasibleScenario : public std::runtime_error {
 public:
  explicit InfeasibleScenario(const std::string& what) : std::runtime_error(what) {}
};

/// An optimization step left the search manifold irrecoverably
/// (e.g. a circle-manifold retraction from a near-zero entry).
class DegenerateRetraction : public std::runtime_error {
 public:
  explicit DegenerateRetraction(const std::string& what) : std::runtime_error(what) {}
};

/// A surrogate subproblem was handed a linearization point that violates the
/// constraints it is supposed to be feasible for.
class InvalidLinearizationPoint : public std::runtime_error {
 public:
  explicit InvalidLinearizationPoint(const std::string& what) : std::runtime_error(what) {}
};

/// The embedded conic solver failed on a subproblem (did not converge or
/// reported the subproblem infeasible/unbounded).
class SolverFailure : public std::runtime_error {
 public:
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace risisac
