#ifndef COTKD_ERROR_HPP
#define COTKD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cotkd {

// Base class for all toolkit errors. Subclasses carry the contract-level
// error names so callers and tests can catch them individually.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define COTKD_DEFINE_ERROR(NAME)                                  \
  class NAME : public Error {                                     \
  public:                                                         \
    explicit NAME(const std::string& what) : Error(#NAME ": " + what) {} \
  }

// corpus
COTKD_DEFINE_ERROR(EmptyDialogue);
COTKD_DEFINE_ERROR(MalformedThinkTags);
COTKD_DEFINE_ERROR(InsufficientExamples);
COTKD_DEFINE_ERROR(EmptyCorpus);
COTKD_DEFINE_ERROR(OffsetOutOfRange);
COTKD_DEFINE_ERROR(InvalidTokenizerSpec);

// supervision
COTKD_DEFINE_ERROR(DegenerateRegime);
COTKD_DEFINE_ERROR(EmptyResult);

// kdloss
COTKD_DEFINE_ERROR(ShapeMismatch);
COTKD_DEFINE_ERROR(EmptyMask);

// microlm
COTKD_DEFINE_ERROR(SequenceTooLong);

// trainer
COTKD_DEFINE_ERROR(LengthMismatch);
COTKD_DEFINE_ERROR(NonpositiveReference);

// analysis
COTKD_DEFINE_ERROR(TooFewPoints);
COTKD_DEFINE_ERROR(NonpositiveDenominator);
COTKD_DEFINE_ERROR(NonpositiveBaseline);
COTKD_DEFINE_ERROR(SubstringNotFound);
COTKD_DEFINE_ERROR(JudgeProtocolError);

// generic configuration / IO
COTKD_DEFINE_ERROR(ConfigError);
COTKD_DEFINE_ERROR(IoError);

#undef COTKD_DEFINE_ERROR

}  // namespace cotkd

#endif  // COTKD_ERROR_HPP
