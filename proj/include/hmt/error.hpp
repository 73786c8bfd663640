#pragma once

#include <stdexcept>
#include <string>

namespace hmt {

enum class ErrorCode {
  root_has_no_parent,
  spine_required,
  block_misaligned,
  not_stochastic,
  non_finite,
  invalid_root_law,
  mask_outside_sample,
  degenerate_variance,
  method_unavailable,
  region_too_shallow,
  singular_information,
  invalid_argument,
  io,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hmt
