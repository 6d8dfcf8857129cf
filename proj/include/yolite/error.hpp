#pragma once

#include <stdexcept>
#include <string>

namespace yolite {

// Every failure raised by the library is a yolite::Error (or a subclass that
// carries a more specific code, see weights_io.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define YOLITE_CHECK(cond, msg)                                                                    \
    do {                                                                                           \
        if (!(cond)) throw ::yolite::Error(msg);                                                   \
    } while (0)

}  // namespace yolite
