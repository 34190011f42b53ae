#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ringlm {

enum class MsgType : std::uint8_t {
    activation = 1,
    stop = 2,
};

// The unit exchanged between ring neighbors. The payload of an activation
// frame is row_count * dim little-endian 32-bit floats; step is the absolute
// token position of the first payload row (the number of tokens every node
// has already cached for this sample).
struct ActivationFrame {
    MsgType type = MsgType::activation;
    std::uint32_t sample_id = 0;
    std::uint32_t step = 0;
    std::uint32_t row_count = 0;
    std::uint32_t dim = 0;
    std::vector<float> payload;

    static ActivationFrame stop() {
        ActivationFrame f;
        f.type = MsgType::stop;
        return f;
    }

    std::size_t payload_bytes() const { return payload.size() * 4; }

    bool operator==(const ActivationFrame&) const = default;
};

// Wire layout, all integers little-endian:
//   magic u16 = 0x4D44, version u8 = 1, msg_type u8,
//   sample_id u32, step u32, row_count u32, dim u32, payload_len u32,
//   payload bytes (payload_len = 4 * row_count * dim).
inline constexpr std::uint16_t kFrameMagic = 0x4D44;
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 24;
inline constexpr std::size_t kDefaultMaxPayload = 64ull * 1024 * 1024;

// Throws FrameError(length_mismatch) when the payload does not match
// row_count * dim, or when a stop frame carries a payload.
std::vector<std::uint8_t> encode_frame(const ActivationFrame& frame);

// Inverse of encode_frame over a complete frame's bytes. Throws FrameError
// with a distinct kind for bad magic, unsupported version, unknown type,
// payload_len over the limit, payload/row mismatch, and truncation.
ActivationFrame decode_frame(std::span<const std::uint8_t> bytes,
                             std::size_t max_payload = kDefaultMaxPayload);

// Anything that can hand over bytes as they arrive: sockets, test fixtures.
// read_some returns the number of bytes produced (>= 1), or 0 at end of
// stream. It may return fewer bytes than asked for.
class ByteSource {
public:
    virtual ~ByteSource() = default;
    virtual std::size_t read_some(std::uint8_t* buf, std::size_t max) = 0;
};

// Read exactly one frame off a stream, looping over arbitrary segmentation
// and never consuming bytes of the next frame. Returns nullopt on a clean
// close (end of stream at a frame boundary); throws FrameError(truncated)
// when the stream ends mid-frame.
std::optional<ActivationFrame> read_frame(ByteSource& source,
                                          std::size_t max_payload = kDefaultMaxPayload);

} // namespace ringlm
