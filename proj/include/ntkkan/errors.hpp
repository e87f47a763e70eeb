#pragma once

#include <stdexcept>
#include <string>

namespace ntkkan {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid or inconsistent configuration (bad spec, bad knots, bad counts).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Jet operands of different truncation order, or order out of range.
class OrderMismatch : public std::runtime_error {
public:
    explicit OrderMismatch(const std::string& what) : std::runtime_error(what) {}
};

/// Parameter-gradient payload requested but not propagated.
class PayloadMissing : public std::runtime_error {
public:
    explicit PayloadMissing(const std::string& what) : std::runtime_error(what) {}
};

/// Matrix expected to be symmetric is not, within tolerance.
class NonSymmetric : public std::runtime_error {
public:
    explicit NonSymmetric(const std::string& what) : std::runtime_error(what) {}
};

/// Eigensolver exceeded its iteration cap.
class NoConvergence : public std::runtime_error {
public:
    explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};

/// Loss became NaN/Inf during training.
class NonFiniteLoss : public std::runtime_error {
public:
    explicit NonFiniteLoss(const std::string& what) : std::runtime_error(what) {}
};

/// Snapshot sequences that do not share point sets or lengths.
class MismatchedSnapshots : public std::runtime_error {
public:
    explicit MismatchedSnapshots(const std::string& what) : std::runtime_error(what) {}
};

/// Problem has no exact or reference solution to compare against.
class NoReferenceSolution : public std::runtime_error {
public:
    explicit NoReferenceSolution(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ntkkan
