#pragma once

#include <stdexcept>
#include <string>

namespace protofs {

/// Root of every error raised by the library. The CLI maps any of these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class DegenerateBatchError : public Error { using Error::Error; };
class LabelError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class CorruptionError : public Error { using Error::Error; };
class IndexingError : public Error { using Error::Error; };
class EpisodeInfeasibleError : public Error { using Error::Error; };
class EpisodeMalformedError : public Error { using Error::Error; };

} // namespace protofs
