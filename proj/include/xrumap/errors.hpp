#ifndef XRUMAP_ERRORS_HPP
#define XRUMAP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace xrumap {

// Error categories map onto CLI exit codes: config 2, data 3, numerical 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

}  // namespace xrumap

#endif
