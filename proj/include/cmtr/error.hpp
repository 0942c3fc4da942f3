#pragma once

#include <stdexcept>
#include <string>

namespace cmtr {

// Invalid configuration or usage. The CLI maps this to exit status 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Anything that fails while processing valid configuration (I/O, bad records,
// backend failures). The CLI maps this to exit status 1.
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cmtr
