// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace usim {

// Every contract violation maps to exactly one kind so callers (and the CLI)
// can dispatch on it without parsing messages.
enum class ErrorKind {
  io_error,
  malformed_header,
  truncated_data,
  unsupported_format,
  invalid_argument,
  dimension_mismatch,
  image_too_small,
  degenerate_reference,
  constant_series,
  length_mismatch,
  zero_variance_template,
  empty_histogram,
  out_of_frame,
  manifest_error,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io_error: return "io_error";
    case ErrorKind::malformed_header: return "malformed_header";
    case ErrorKind::truncated_data: return "truncated_data";
    case ErrorKind::unsupported_format: return "unsupported_format";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::image_too_small: return "image_too_small";
    case ErrorKind::degenerate_reference: return "degenerate_reference";
    case ErrorKind::constant_series: return "constant_series";
    case ErrorKind::length_mismatch: return "length_mismatch";
    case ErrorKind::zero_variance_template: return "zero_variance_template";
    case ErrorKind::empty_histogram: return "empty_histogram";
    case ErrorKind::out_of_frame: return "out_of_frame";
    case ErrorKind::manifest_error: return "manifest_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

}  // namespace detail
}  // namespace usim
