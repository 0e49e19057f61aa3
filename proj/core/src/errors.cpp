#include "probekit/errors.hpp"

namespace probekit {

IoError::IoError(const std::string& path, const std::string& what)
    : Error(path + ": " + what), path_(path) {}

IoError::IoError(Preformatted, const std::string& path, const std::string& message)
    : Error(message), path_(path) {}

NotFoundError::NotFoundError(const std::string& path)
    : IoError(Preformatted{}, path, "no such file: " + path) {}

}  // namespace probekit
