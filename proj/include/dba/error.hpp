#pragma once

#include <stdexcept>
#include <string>

namespace dba {

// Raised when an on-disk artifact is malformed: bad magic, truncation,
// version or checksum mismatch. The message names the file and byte offset.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dba
