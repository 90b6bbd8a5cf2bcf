// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/error.hpp"

namespace ullava {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadShape: return "BadShape";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::UnknownPlaceholder: return "UnknownPlaceholder";
        case ErrorCode::InvalidSample: return "InvalidSample";
        case ErrorCode::TooLong: return "TooLong";
        case ErrorCode::SequenceTooLong: return "SequenceTooLong";
        case ErrorCode::EmptyLossMask: return "EmptyLossMask";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::MalformedRle: return "MalformedRle";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::ClientError: return "ClientError";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::NoEvidence: return "NoEvidence";
        case ErrorCode::BadCorpus: return "BadCorpus";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorCode::Validation: return "Validation";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace ullava
