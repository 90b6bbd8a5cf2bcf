// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ullava {

enum class ErrorCode {
    BadShape,
    DimMismatch,
    ShapeMismatch,
    UnknownPlaceholder,
    InvalidSample,
    TooLong,
    SequenceTooLong,
    EmptyLossMask,
    IndexOutOfRange,
    MalformedRle,
    EmptyMask,
    ClientError,
    ParseError,
    NoEvidence,
    BadCorpus,
    VersionMismatch,
    CorruptCheckpoint,
    Validation,
    Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ullava
