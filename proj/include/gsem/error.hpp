#pragma once

#include <stdexcept>
#include <string>

namespace gsem {

// Base class for every error raised by the library. The message is the
// user-facing diagnostic; callers switch on the concrete type only when they
// need a different exit path.
class error : public std::runtime_error {
public:
   using std::runtime_error::runtime_error;
};

class codec_error : public error {
public:
   using error::error;
};

class format_error : public error {
public:
   using error::error;
};

class dimension_error : public error {
public:
   using error::error;
};

class config_error : public error {
public:
   using error::error;
};

} // namespace gsem
