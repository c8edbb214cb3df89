#pragma once

#include <stdexcept>
#include <string>

namespace geostyle {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSONL line, CSV row, date string).
struct ParseError : Error {
    using Error::Error;
};

/// Stream/file could not be read or written.
struct IoError : Error {
    using Error::Error;
};

/// More than half of an input corpus was unusable.
struct CorpusError : Error {
    using Error::Error;
};

/// Requested attribute/signal does not exist in the data.
struct SignalError : Error {
    using Error::Error;
};

/// Not enough observations to run an operation.
struct InsufficientDataError : Error {
    using Error::Error;
};

/// All solver starts failed; carries diagnostics in the message.
struct FitError : Error {
    using Error::Error;
};

/// Caller violated a documented precondition (dimension mismatch etc.).
struct ContractError : Error {
    using Error::Error;
};

/// Input is degenerate for the requested operation (e.g. identical vectors).
struct DegenerateInputError : Error {
    using Error::Error;
};

/// An analysis has no meaningful answer (e.g. < 2 eligible cities).
struct AnalysisError : Error {
    using Error::Error;
};

/// Requested artifact is missing.
struct NotFoundError : Error {
    using Error::Error;
};

} // namespace geostyle
