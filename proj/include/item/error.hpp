#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace item {

enum class ErrorCode {
    // core / classifier
    ZeroNormEmbedding,
    DimensionMismatch,
    EmptyObjectSet,
    EmptyBatch,
    EmptyDataset,
    NonFiniteLoss,
    InvalidConfig,
    // providers
    InvalidInput,
    ImageDecodeError,
    RemoteError,
    Timeout,
    ProtocolViolation,
    MissingArtifact,
    // pipeline
    ParseError,
    DuplicateId,
    AllSamplesFailed,
    SingleClassDataset,
    IoError,
    FormatError,
    EmptyExport,
    // eval
    EmptyInput,
    NoPositives,
    InvalidSigma,
    EncodeError,
};

// Coarse grouping used for CLI exit codes.
enum class ErrorCategory { Usage, Data, Provider, Internal };

inline std::string_view to_string(ErrorCode c) noexcept {
    switch (c) {
        case ErrorCode::ZeroNormEmbedding: return "ZeroNormEmbedding";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyObjectSet: return "EmptyObjectSet";
        case ErrorCode::EmptyBatch: return "EmptyBatch";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::ImageDecodeError: return "ImageDecodeError";
        case ErrorCode::RemoteError: return "RemoteError";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::ProtocolViolation: return "ProtocolViolation";
        case ErrorCode::MissingArtifact: return "MissingArtifact";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::AllSamplesFailed: return "AllSamplesFailed";
        case ErrorCode::SingleClassDataset: return "SingleClassDataset";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::EmptyExport: return "EmptyExport";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::NoPositives: return "NoPositives";
        case ErrorCode::InvalidSigma: return "InvalidSigma";
        case ErrorCode::EncodeError: return "EncodeError";
    }
    return "Unknown";
}

inline ErrorCategory category(ErrorCode c) noexcept {
    switch (c) {
        case ErrorCode::InvalidConfig:
            return ErrorCategory::Usage;
        case ErrorCode::RemoteError:
        case ErrorCode::Timeout:
        case ErrorCode::ProtocolViolation:
            return ErrorCategory::Provider;
        case ErrorCode::NonFiniteLoss:
        case ErrorCode::EncodeError:
            return ErrorCategory::Internal;
        default:
            return ErrorCategory::Data;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    // what() without the code prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

// Non-2xx reply from a remote provider; keeps the HTTP status.
class RemoteError : public Error {
public:
    RemoteError(int status, const std::string& body_excerpt)
        : Error(ErrorCode::RemoteError,
                "HTTP " + std::to_string(status) + ": " + body_excerpt),
          status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace item
