/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/rangecoder.hpp"

#include <cmath>
#include <stdexcept>

namespace gsr {

namespace {
constexpr uint32_t kTopBits = 24;
constexpr uint32_t kTop = 1u << kTopBits;
// Totals stay well below 2^24 so range/total never truncates to zero.
constexpr uint32_t kMaxTotal = 1u << 22;
}  // namespace

FreqTable FreqTable::build(std::span<const uint8_t> symbols) {
    std::array<uint32_t, 256> raw{};
    for (const uint8_t s : symbols) ++raw[s];
    return from_counts(raw);
}

FreqTable FreqTable::from_counts(const std::array<uint32_t, 256>& raw) {
    FreqTable t;
    uint64_t total = 0;
    for (int i = 0; i < 256; ++i) {
        t.counts[i] = raw[i] + 1;  // Laplace smoothing
        total += t.counts[i];
    }
    while (total >= kMaxTotal) {
        total = 0;
        for (auto& c : t.counts) {
            c = (c + 1) / 2;
            total += c;
        }
    }
    return t;
}

double FreqTable::cross_entropy_bits(std::span<const uint8_t> symbols) const {
    uint64_t total = 0;
    for (const uint32_t c : counts) total += c;
    double bits = 0.0;
    for (const uint8_t s : symbols)
        bits += std::log2(static_cast<double>(total) / counts[s]);
    return bits;
}

CumTable::CumTable(const FreqTable& t) {
    uint32_t acc = 0;
    for (int i = 0; i < 256; ++i) {
        cum[i] = acc;
        acc += t.counts[i];
        if (t.counts[i] == 0)
            throw std::logic_error("range coder: zero-frequency symbol in model");
    }
    cum[256] = acc;
    total = acc;
    if (total >= kMaxTotal) throw std::logic_error("range coder: model total too large");
}

void RangeEncoder::shift_low() {
    if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
        uint8_t carry = static_cast<uint8_t>(low_ >> 32);
        uint8_t b = cache_;
        do {
            out_.push_back(static_cast<uint8_t>(b + carry));
            b = 0xFF;
        } while (--cache_size_ != 0);
        cache_ = static_cast<uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ << 8) & 0xFFFFFFFFull;
}

void RangeEncoder::encode(uint8_t symbol, const CumTable& t) {
    const uint32_t r = range_ / t.total;
    low_ += static_cast<uint64_t>(r) * t.cum[symbol];
    range_ = r * (t.cum[symbol + 1] - t.cum[symbol]);
    while (range_ < kTop) {
        shift_low();
        range_ <<= 8;
    }
}

void RangeEncoder::flush() {
    for (int i = 0; i < 5; ++i) shift_low();
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
    next_byte();  // the encoder's initial cache byte
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::decode(const CumTable& t) {
    const uint32_t r = range_ / t.total;
    uint32_t dv = code_ / r;
    if (dv >= t.total) dv = t.total - 1;  // corrupt stream; CRC catches it later
    // Binary search the cumulative table.
    int lo = 0, hi = 255;
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (t.cum[mid] <= dv)
            lo = mid;
        else
            hi = mid - 1;
    }
    const uint8_t symbol = static_cast<uint8_t>(lo);
    code_ -= r * t.cum[symbol];
    range_ = r * (t.cum[symbol + 1] - t.cum[symbol]);
    while (range_ < kTop) {
        code_ = (code_ << 8) | next_byte();
        range_ <<= 8;
    }
    return symbol;
}

std::vector<uint8_t> entropy_encode(std::span<const uint8_t> symbols, const FreqTable& table) {
    std::vector<uint8_t> out;
    const CumTable cum(table);
    RangeEncoder enc(out);
    for (const uint8_t s : symbols) enc.encode(s, cum);
    enc.flush();
    return out;
}

std::vector<uint8_t> entropy_decode(std::span<const uint8_t> bytes, size_t symbol_count,
                                    const FreqTable& table) {
    std::vector<uint8_t> out(symbol_count);
    const CumTable cum(table);
    RangeDecoder dec(bytes.data(), bytes.size());
    for (size_t i = 0; i < symbol_count; ++i) out[i] = dec.decode(cum);
    return out;
}

}  // namespace gsr
