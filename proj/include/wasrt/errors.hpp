#pragma once

#include <stdexcept>
#include <string>

namespace wasrt {

// Error categories map onto CLI exit codes: ConfigError -> 1 (usage),
// DataError/IoError/SchemaError -> 2 (data), everything else -> 3 (runtime).

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class StreamError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wasrt
