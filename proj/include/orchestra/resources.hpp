#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

namespace orchestra {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A scenario or topology description is inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An input file could not be read or an output file could not be written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Resource arithmetic went negative. Always a scheduler-cache bug.
class ResourceUnderflow : public Error {
public:
    using Error::Error;
};

/// CPU in millicores, memory in MiB, GPUs as a device count.
struct Resources {
    std::int64_t cpu = 0;
    std::int64_t memory = 0;
    std::int64_t gpu = 0;

    [[nodiscard]] bool is_valid() const noexcept { return cpu >= 0 && memory >= 0 && gpu >= 0; }
    [[nodiscard]] bool is_zero() const noexcept { return cpu == 0 && memory == 0 && gpu == 0; }

    Resources& operator+=(const Resources& o) noexcept {
        cpu += o.cpu;
        memory += o.memory;
        gpu += o.gpu;
        return *this;
    }

    friend Resources operator+(Resources a, const Resources& b) noexcept { return a += b; }
    friend bool operator==(const Resources&, const Resources&) = default;
};

/// True iff `request` fits inside `free` in every dimension.
[[nodiscard]] inline bool fits(const Resources& request, const Resources& free) noexcept {
    return request.cpu <= free.cpu && request.memory <= free.memory && request.gpu <= free.gpu;
}

/// `free - request`, throwing ResourceUnderflow if any component would go negative.
[[nodiscard]] Resources checked_sub(const Resources& free, const Resources& request);

std::string to_string(const Resources& r);
std::ostream& operator<<(std::ostream& os, const Resources& r);

}  // namespace orchestra
