#pragma once

#include <stdexcept>
#include <string>

namespace stance {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DatasetNotFound : public Error {
public:
    using Error::Error;
};

/// A record or file does not match the unified schema or a descriptor.
class SchemaViolation : public Error {
public:
    using Error::Error;
};

/// A label has no entry in the hard-group table.
class UnmappedLabel : public Error {
public:
    using Error::Error;
};

/// Every constituent word of a label name is missing from the vector table.
class OutOfVocabulary : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class Divergence : public Error {
public:
    using Error::Error;
};

}  // namespace stance
