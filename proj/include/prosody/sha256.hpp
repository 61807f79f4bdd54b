#ifndef PROSODY_SHA256_HPP_
#define PROSODY_SHA256_HPP_

#include <string>
#include <string_view>

namespace prosody {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);  // throws DataError

}  // namespace prosody

#endif  // PROSODY_SHA256_HPP_
