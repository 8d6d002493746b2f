#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fgcl {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct SyntaxError : Error {
    SyntaxError(const std::string& msg, std::size_t offset)
        : Error(msg + " (byte offset " + std::to_string(offset) + ")"), offset(offset) {}
    std::size_t offset;
};

struct IoError : Error {
    using Error::Error;
};

struct CorpusError : Error {
    CorpusError(const std::string& msg, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + msg), line(line) {}
    std::size_t line;
};

struct DuplicateIdError : Error {
    explicit DuplicateIdError(const std::string& id)
        : Error("duplicate formula id: " + id), id(id) {}
    std::string id;
};

struct PoolTooSmallError : Error {
    using Error::Error;
};

struct IncompleteMapError : Error {
    using Error::Error;
};

struct EmptyVocabularyError : Error {
    using Error::Error;
};

struct DimensionMismatchError : Error {
    using Error::Error;
};

struct BatchTooSmallError : Error {
    using Error::Error;
};

struct CorpusTooSmallError : Error {
    using Error::Error;
};

struct ZeroVectorError : Error {
    using Error::Error;
};

struct ProvenanceMismatchError : Error {
    using Error::Error;
};

struct VersionMismatchError : Error {
    using Error::Error;
};

struct CorruptFileError : Error {
    using Error::Error;
};

struct QrelsError : Error {
    using Error::Error;
};

struct DuplicateJudgmentError : Error {
    using Error::Error;
};

struct NoRelevantJudgmentsError : Error {
    using Error::Error;
};

struct MissingCellError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace fgcl
