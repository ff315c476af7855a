#pragma once

#include <stdexcept>
#include <string>

namespace sfd {

// Shape/dimension mismatches between tensor operands.
struct shape_error : std::runtime_error {
  explicit shape_error(const std::string& what) : std::runtime_error(what) {}
};

// Violated preconditions other than shape (time out of range, asymmetric
// matrix, unknown label, ...).
struct contract_error : std::runtime_error {
  explicit contract_error(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite losses or gradients, adaptive-stepper underflow.
struct divergence_error : std::runtime_error {
  explicit divergence_error(const std::string& what) : std::runtime_error(what) {}
};

// A (t_sem, t_tex) pair that belongs to no phase of the mask schedule.
struct schedule_error : std::runtime_error {
  explicit schedule_error(const std::string& what) : std::runtime_error(what) {}
};

// Matrix handed to sqrtm_psd has an eigenvalue below the PSD tolerance.
struct not_psd_error : std::runtime_error {
  explicit not_psd_error(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration file / key / value.  CLI maps this to exit code 3.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Missing input artifact (dataset, checkpoint).  CLI maps this to exit code 2.
struct dependency_error : std::runtime_error {
  explicit dependency_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed artifact bytes (bad magic, CRC mismatch, truncated file).
struct format_error : std::runtime_error {
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sfd
