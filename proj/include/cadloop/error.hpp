#pragma once

#include <stdexcept>
#include <string>

namespace cadloop {

enum class ErrorCode {
    file_not_found,
    unsupported_format,
    malformed_geometry,
    zero_area_mesh,
    degenerate_extent,
    non_finite_geometry,
    parse_error,
    range_error,
    degenerate_solid,
    generation_exhausted,
    insufficient_samples,
    corrupt_payload,
    degenerate_hull,
    reconstruction_failed,
    external_tool_error,
    empty_after_holes,
    missing_view,
    duplicate_view,
    dimension_mismatch,
    empty_union,
    out_of_domain,
    missing_ground_truth,
    missing_rollout,
    empty_split,
    io_error,
    timeout,
    bad_response,
    missing_key,
    manifest_mismatch,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Parse failures carry the source location of the offending token.
class ParseError : public Error {
public:
    ParseError(int line, int col, const std::string& message)
        : Error(ErrorCode::parse_error,
                "line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + message),
          line_(line), col_(col) {}

    int line() const noexcept { return line_; }
    int col() const noexcept { return col_; }

private:
    int line_;
    int col_;
};

}  // namespace cadloop
