#include "zvvc/manifest.hpp"

#include "zvvc/csv.hpp"

#include <array>

namespace zvvc {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(std::string_view bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::uint64_t h = fnv1a64(bytes);
    std::array<char, 16> buf;
    for (int i = 15; i >= 0; --i) {
        buf[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return std::string(buf.data(), buf.size());
}

std::string hash_file(const std::string& path) {
    return hash_hex(csv::read_text_file(path));
}

} // namespace zvvc
