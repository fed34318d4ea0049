#include "orchestra/resources.hpp"

#include <sstream>

namespace orchestra {

Resources checked_sub(const Resources& free, const Resources& request) {
    Resources out{free.cpu - request.cpu, free.memory - request.memory, free.gpu - request.gpu};
    if (!out.is_valid()) {
        throw ResourceUnderflow("resource underflow: " + to_string(free) + " - " + to_string(request));
    }
    return out;
}

std::string to_string(const Resources& r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

std::ostream& operator<<(std::ostream& os, const Resources& r) {
    return os << "{cpu:" << r.cpu << "m, mem:" << r.memory << "Mi, gpu:" << r.gpu << "}";
}

}  // namespace orchestra
