#ifndef CROPATTN_ERRORS_HPP
#define CROPATTN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cropattn {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define CROPATTN_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                        \
  public:                                                            \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

// dataset
CROPATTN_DEFINE_ERROR(DegenerateInput);
CROPATTN_DEFINE_ERROR(ParseError);
CROPATTN_DEFINE_ERROR(SchemaError);
CROPATTN_DEFINE_ERROR(EmptyDataset);
CROPATTN_DEFINE_ERROR(InvalidConfig);
CROPATTN_DEFINE_ERROR(LengthExceeded);
CROPATTN_DEFINE_ERROR(TooShort);
CROPATTN_DEFINE_ERROR(OddDimension);

// model
CROPATTN_DEFINE_ERROR(ShapeMismatch);
CROPATTN_DEFINE_ERROR(NonFiniteLoss);
CROPATTN_DEFINE_ERROR(NonFiniteLogits);

// training
CROPATTN_DEFINE_ERROR(EmptySplit);
CROPATTN_DEFINE_ERROR(DivergedLoss);

// explain
CROPATTN_DEFINE_ERROR(EmptyRecord);
CROPATTN_DEFINE_ERROR(NoParcelsForCrop);
CROPATTN_DEFINE_ERROR(EmptyInput);
CROPATTN_DEFINE_ERROR(TopTooLarge);
CROPATTN_DEFINE_ERROR(EmptyResult);
CROPATTN_DEFINE_ERROR(DateAbsent);

// sensitivity
CROPATTN_DEFINE_ERROR(UnknownCrop);
CROPATTN_DEFINE_ERROR(TooFewClasses);
CROPATTN_DEFINE_ERROR(ParcelMismatch);

#undef CROPATTN_DEFINE_ERROR

} // namespace cropattn

#endif // CROPATTN_ERRORS_HPP
