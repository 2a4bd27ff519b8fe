#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qrac::frames {

struct RawFrame {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels; // RGB, row-major, h * w * 3

    std::size_t index(int row, int col, int channel) const {
        return (static_cast<std::size_t>(row) * width + col) * 3 + channel;
    }
};

// Single luminance/feature plane, values in [0, 1].
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    double at(int row, int col) const {
        return values[static_cast<std::size_t>(row) * width + col];
    }
};

constexpr int kStateSize = 84;
constexpr int kDefaultPhiLength = 4;

// ITU-R 601 luminance, scaled to [0, 1].
Plane grayscale(const RawFrame& frame);

// Per-pixel max of two equally sized frames.
RawFrame maxpool_pair(const RawFrame& current, const RawFrame& previous);

// Bilinear resize to 84x84 using pixel-center sampling; an 84x84 input maps
// to itself.
Plane downsample(const Plane& plane);

// FIFO stack of the phi_length most recent planes, oldest first.
struct StackedState {
    std::vector<Plane> planes;
};

StackedState make_stacked_state(const Plane& first, int phi_length = kDefaultPhiLength);
void push_frame(StackedState& state, Plane plane);

double clip_reward(double r);

// Frame-skip bookkeeping as a pure state machine over injected emulator
// outputs: every action is repeated over 4 raw frames, the last two frames
// of the window are max-pooled, rewards are summed over the window then
// clipped, and losing a life (or hitting the frame cap) terminates.
class PreprocessPipeline {
  public:
    struct Input {
        RawFrame frame;
        double reward = 0.0;
        int lives = 0;
    };

    struct Output {
        StackedState state;
        double clipped_reward = 0.0;
        bool terminal = false;
    };

    explicit PreprocessPipeline(int phi_length = kDefaultPhiLength, int action_repeat = 4,
                                long max_frames = 108000);

    // Feed one raw emulator frame; emits an Output at the end of every
    // action-repeat window.
    std::optional<Output> feed(const Input& input);
    void reset();

  private:
    int phi_length_;
    int action_repeat_;
    long max_frames_;
    long frames_seen_ = 0;
    int window_filled_ = 0;
    double window_reward_ = 0.0;
    std::optional<int> lives_;
    RawFrame last_frame_;
    RawFrame prev_frame_;
    std::optional<StackedState> state_;
};

// Fixture I/O: a raw frame as flat binary (int32 height, int32 width, then
// RGB bytes row-major, little-endian) and planes as raw little-endian f64.
RawFrame load_raw_frame(const std::string& path);
void save_raw_frame(const RawFrame& frame, const std::string& path);
Plane load_plane(const std::string& path, int height, int width);
void save_plane(const Plane& plane, const std::string& path);

} // namespace qrac::frames
