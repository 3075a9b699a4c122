#ifndef RKME_ERRORS_HPP
#define RKME_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rkme {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent caller input (bad dimensions, empty data,
// M > N, unparsable files). Maps to CLI exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

// Incompatible configuration, e.g. embeddings built with different kernels.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Duplicate id on upload, or a pool already locked by another writer.
class ConflictError : public Error {
public:
    using Error::Error;
};

// Lookup of an id that is not in the pool.
class NotFoundError : public Error {
public:
    using Error::Error;
};

// Persistent pool state fails validation (corrupt manifest, hash mismatch).
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Numerical failure: singular system without regularization, or a
// non-finite objective. Maps to CLI exit code 3.
class SolverError : public Error {
public:
    using Error::Error;
};

// External model subprocess failed; message carries captured diagnostics.
class ExternalModelError : public Error {
public:
    using Error::Error;
};

} // namespace rkme

#endif
