#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kerbs {

enum class ErrorKind {
  kDimension,
  kNumeric,
  kContract,
  kDegenerateVector,
  kVocab,
  kData,
  kConfig,
  kFormat,
  kCorruption,
  kIo,
};

std::string_view error_kind_name(ErrorKind kind);

// Base of every error thrown by the library. what() is a single line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define KERBS_DEFINE_ERROR(Name, Kind)                                 \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  };

KERBS_DEFINE_ERROR(DimensionError, ErrorKind::kDimension)
KERBS_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
KERBS_DEFINE_ERROR(ContractError, ErrorKind::kContract)
KERBS_DEFINE_ERROR(DegenerateVectorError, ErrorKind::kDegenerateVector)
KERBS_DEFINE_ERROR(VocabError, ErrorKind::kVocab)
KERBS_DEFINE_ERROR(DataError, ErrorKind::kData)
KERBS_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
KERBS_DEFINE_ERROR(FormatError, ErrorKind::kFormat)
KERBS_DEFINE_ERROR(CorruptionError, ErrorKind::kCorruption)
KERBS_DEFINE_ERROR(IoError, ErrorKind::kIo)

#undef KERBS_DEFINE_ERROR

}  // namespace kerbs
