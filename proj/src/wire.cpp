#include "ringlm/wire.hpp"

#include <cstring>
#include <string>

#include "ringlm/error.hpp"

namespace ringlm {

namespace {

struct FrameHeader {
    MsgType type;
    std::uint32_t sample_id;
    std::uint32_t step;
    std::uint32_t row_count;
    std::uint32_t dim;
    std::uint32_t payload_len;
};

std::uint16_t load_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t load_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v & 0xff);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

void store_u32(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v & 0xff);
    p[1] = static_cast<std::uint8_t>((v >> 8) & 0xff);
    p[2] = static_cast<std::uint8_t>((v >> 16) & 0xff);
    p[3] = static_cast<std::uint8_t>((v >> 24) & 0xff);
}

// Parses and validates the fixed 24-byte header.
FrameHeader parse_header(const std::uint8_t* h, std::size_t max_payload) {
    const std::uint16_t magic = load_u16(h);
    if (magic != kFrameMagic) {
        throw FrameError(FrameError::Kind::bad_magic,
                         "bad frame magic 0x" + std::to_string(magic));
    }
    const std::uint8_t version = h[2];
    if (version != kFrameVersion) {
        throw FrameError(FrameError::Kind::bad_version,
                         "unsupported frame version " + std::to_string(version));
    }
    const std::uint8_t type = h[3];
    if (type != static_cast<std::uint8_t>(MsgType::activation) &&
        type != static_cast<std::uint8_t>(MsgType::stop)) {
        throw FrameError(FrameError::Kind::bad_type,
                         "unknown message type " + std::to_string(type));
    }

    FrameHeader hdr;
    hdr.type = static_cast<MsgType>(type);
    hdr.sample_id = load_u32(h + 4);
    hdr.step = load_u32(h + 8);
    hdr.row_count = load_u32(h + 12);
    hdr.dim = load_u32(h + 16);
    hdr.payload_len = load_u32(h + 20);

    if (hdr.payload_len > max_payload) {
        throw FrameError(FrameError::Kind::size_limit,
                         "payload of " + std::to_string(hdr.payload_len) +
                             " bytes exceeds limit " + std::to_string(max_payload));
    }
    const std::uint64_t expected =
        4ull * hdr.row_count * hdr.dim;
    if (expected != hdr.payload_len) {
        throw FrameError(FrameError::Kind::length_mismatch,
                         "payload_len " + std::to_string(hdr.payload_len) + " != 4 * " +
                             std::to_string(hdr.row_count) + " * " + std::to_string(hdr.dim));
    }
    if (hdr.type == MsgType::stop && (hdr.row_count != 0 || hdr.dim != 0)) {
        throw FrameError(FrameError::Kind::bad_type, "stop frame carries rows");
    }
    return hdr;
}

ActivationFrame from_parts(const FrameHeader& hdr, const std::uint8_t* payload) {
    ActivationFrame f;
    f.type = hdr.type;
    f.sample_id = hdr.sample_id;
    f.step = hdr.step;
    f.row_count = hdr.row_count;
    f.dim = hdr.dim;
    f.payload.resize(static_cast<std::size_t>(hdr.row_count) * hdr.dim);
    if (!f.payload.empty()) {
        std::memcpy(f.payload.data(), payload, hdr.payload_len);
    }
    return f;
}

} // namespace

std::vector<std::uint8_t> encode_frame(const ActivationFrame& frame) {
    const std::uint64_t expected = static_cast<std::uint64_t>(frame.row_count) * frame.dim;
    if (frame.payload.size() != expected) {
        throw FrameError(FrameError::Kind::length_mismatch,
                         "payload holds " + std::to_string(frame.payload.size()) +
                             " floats, header claims " + std::to_string(expected));
    }
    if (frame.type == MsgType::stop && (frame.row_count != 0 || frame.dim != 0)) {
        throw FrameError(FrameError::Kind::bad_type, "stop frame carries rows");
    }

    std::vector<std::uint8_t> out(kFrameHeaderSize + frame.payload_bytes());
    std::uint8_t* p = out.data();
    store_u16(p, kFrameMagic);
    p[2] = kFrameVersion;
    p[3] = static_cast<std::uint8_t>(frame.type);
    store_u32(p + 4, frame.sample_id);
    store_u32(p + 8, frame.step);
    store_u32(p + 12, frame.row_count);
    store_u32(p + 16, frame.dim);
    store_u32(p + 20, static_cast<std::uint32_t>(frame.payload_bytes()));
    if (!frame.payload.empty()) {
        std::memcpy(p + kFrameHeaderSize, frame.payload.data(), frame.payload_bytes());
    }
    return out;
}

ActivationFrame decode_frame(std::span<const std::uint8_t> bytes, std::size_t max_payload) {
    if (bytes.size() < kFrameHeaderSize) {
        throw FrameError(FrameError::Kind::truncated,
                         "frame of " + std::to_string(bytes.size()) +
                             " bytes is shorter than the header");
    }
    const FrameHeader hdr = parse_header(bytes.data(), max_payload);
    if (bytes.size() != kFrameHeaderSize + hdr.payload_len) {
        throw FrameError(FrameError::Kind::truncated,
                         "frame length " + std::to_string(bytes.size()) + " != header + " +
                             std::to_string(hdr.payload_len) + " payload bytes");
    }
    return from_parts(hdr, bytes.data() + kFrameHeaderSize);
}

std::optional<ActivationFrame> read_frame(ByteSource& source, std::size_t max_payload) {
    std::uint8_t header[kFrameHeaderSize];
    std::size_t got = 0;
    while (got < kFrameHeaderSize) {
        const std::size_t n = source.read_some(header + got, kFrameHeaderSize - got);
        if (n == 0) {
            if (got == 0) return std::nullopt; // clean close between frames
            throw FrameError(FrameError::Kind::truncated,
                             "stream ended after " + std::to_string(got) +
                                 " of 24 header bytes");
        }
        got += n;
    }

    const FrameHeader hdr = parse_header(header, max_payload);
    std::vector<std::uint8_t> payload(hdr.payload_len);
    std::size_t have = 0;
    while (have < payload.size()) {
        const std::size_t n = source.read_some(payload.data() + have, payload.size() - have);
        if (n == 0) {
            throw FrameError(FrameError::Kind::truncated,
                             "stream ended after " + std::to_string(have) + " of " +
                                 std::to_string(payload.size()) + " payload bytes");
        }
        have += n;
    }
    return from_parts(hdr, payload.data());
}

} // namespace ringlm
