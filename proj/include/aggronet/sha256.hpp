#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aggronet {

// Incremental SHA-256 (FIPS 180-4). Used for content hashes in run manifests
// and for parameter-equality assertions in tests.
class Sha256 {
public:
    Sha256();
    void update(const void* data, size_t len);
    void update(const std::string& s) { update(s.data(), s.size()); }
    // Finalizes and returns the lowercase hex digest. The object must not be
    // updated afterwards.
    std::string hex_digest();

private:
    void process_block(const uint8_t* block);

    uint32_t state_[8];
    uint64_t total_len_ = 0;
    uint8_t buffer_[64];
    size_t buffer_len_ = 0;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);

}  // namespace aggronet
