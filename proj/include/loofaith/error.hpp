#pragma once

#include <stdexcept>
#include <string>

namespace loofaith {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller passed an argument outside the documented domain.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

// Model output could not be parsed into the Thought/Keywords/Short answer triplet.
class ParseError : public Error {
public:
    using Error::Error;
};

// The chat endpoint failed after all retries, or returned a malformed payload.
class ProviderError : public Error {
public:
    using Error::Error;
};

class EmbeddingUnavailable : public Error {
public:
    using Error::Error;
};

class IOError : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    using Error::Error;
};

// Faithfulness requested for a sample whose explanation did not succeed.
class NotScorable : public Error {
public:
    using Error::Error;
};

// A quantity is mathematically undefined for the given input (e.g. a mean over nothing).
class Undefined : public Error {
public:
    using Error::Error;
};

class InvariantViolation : public Error {
public:
    using Error::Error;
};

}  // namespace loofaith
