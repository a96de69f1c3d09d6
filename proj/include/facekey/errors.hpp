#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace facekey {

class HeaderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RecordParseError : public std::runtime_error {
public:
    RecordParseError(std::string column, std::int64_t row_index, const std::string& detail)
        : std::runtime_error("row " + std::to_string(row_index) + ", column '" + column + "': " + detail),
          column_(std::move(column)),
          row_index_(row_index) {}

    const std::string& column() const { return column_; }
    std::int64_t row_index() const { return row_index_; }

private:
    std::string column_;
    std::int64_t row_index_;
};

class SourceOpenError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BindingResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SinkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace facekey
