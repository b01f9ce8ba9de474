/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace gsr {

// Static order-0 byte model. Counts carry +1 Laplace smoothing so every
// symbol stays encodable; totals are rescaled to keep the range coder's
// range/total division exact.
struct FreqTable {
    std::array<uint32_t, 256> counts{};

    static FreqTable build(std::span<const uint8_t> symbols);
    static FreqTable from_counts(const std::array<uint32_t, 256>& raw);

    // Shannon bits per symbol of `symbols` under this model.
    double cross_entropy_bits(std::span<const uint8_t> symbols) const;
};

// Cumulative form used by the coder.
struct CumTable {
    std::array<uint32_t, 257> cum{};
    uint32_t total = 0;
    explicit CumTable(const FreqTable& t);
};

// Carry-propagating byte-wise range coder (32-bit range, 64-bit low).
class RangeEncoder {
public:
    explicit RangeEncoder(std::vector<uint8_t>& out) : out_(out) {}
    void encode(uint8_t symbol, const CumTable& t);
    void flush();

private:
    void shift_low();
    std::vector<uint8_t>& out_;
    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint8_t cache_ = 0;
    int64_t cache_size_ = 1;
};

class RangeDecoder {
public:
    RangeDecoder(const uint8_t* data, size_t size);
    uint8_t decode(const CumTable& t);
    size_t consumed() const { return pos_; }

private:
    uint8_t next_byte() { return pos_ < size_ ? data_[pos_++] : 0; }
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint32_t code_ = 0;
};

// One-shot helpers over a single table.
std::vector<uint8_t> entropy_encode(std::span<const uint8_t> symbols, const FreqTable& table);
std::vector<uint8_t> entropy_decode(std::span<const uint8_t> bytes, size_t symbol_count,
                                    const FreqTable& table);

}  // namespace gsr
