#include "qrac/frames.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qrac::frames {

Plane grayscale(const RawFrame& frame) {
    if (frame.height < 1 || frame.width < 1 ||
        frame.pixels.size() != static_cast<std::size_t>(frame.height) * frame.width * 3) {
        throw std::invalid_argument("malformed RGB frame");
    }
    Plane plane;
    plane.height = frame.height;
    plane.width = frame.width;
    plane.values.resize(static_cast<std::size_t>(frame.height) * frame.width);
    for (int r = 0; r < frame.height; ++r) {
        for (int c = 0; c < frame.width; ++c) {
            const double lum = 0.299 * frame.pixels[frame.index(r, c, 0)] +
                               0.587 * frame.pixels[frame.index(r, c, 1)] +
                               0.114 * frame.pixels[frame.index(r, c, 2)];
            plane.values[static_cast<std::size_t>(r) * frame.width + c] = lum / 255.0;
        }
    }
    return plane;
}

RawFrame maxpool_pair(const RawFrame& current, const RawFrame& previous) {
    if (current.height != previous.height || current.width != previous.width) {
        throw std::logic_error("maxpool_pair dimension mismatch");
    }
    RawFrame out = current;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = std::max(current.pixels[i], previous.pixels[i]);
    }
    return out;
}

Plane downsample(const Plane& plane) {
    if (plane.height < 2 || plane.width < 2) {
        throw std::invalid_argument("downsample input must be at least 2x2");
    }
    Plane out;
    out.height = kStateSize;
    out.width = kStateSize;
    out.values.resize(static_cast<std::size_t>(kStateSize) * kStateSize);
    const double scale_y = static_cast<double>(plane.height) / kStateSize;
    const double scale_x = static_cast<double>(plane.width) / kStateSize;
    for (int r = 0; r < kStateSize; ++r) {
        const double sy = std::clamp((r + 0.5) * scale_y - 0.5, 0.0, plane.height - 1.0);
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, plane.height - 1);
        const double fy = sy - y0;
        for (int c = 0; c < kStateSize; ++c) {
            const double sx = std::clamp((c + 0.5) * scale_x - 0.5, 0.0, plane.width - 1.0);
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, plane.width - 1);
            const double fx = sx - x0;
            const double top = plane.at(y0, x0) * (1.0 - fx) + plane.at(y0, x1) * fx;
            const double bottom = plane.at(y1, x0) * (1.0 - fx) + plane.at(y1, x1) * fx;
            out.values[static_cast<std::size_t>(r) * kStateSize + c] =
                top * (1.0 - fy) + bottom * fy;
        }
    }
    return out;
}

StackedState make_stacked_state(const Plane& first, int phi_length) {
    if (phi_length < 1) throw std::invalid_argument("phi_length must be >= 1");
    StackedState state;
    state.planes.assign(static_cast<std::size_t>(phi_length), first);
    return state;
}

void push_frame(StackedState& state, Plane plane) {
    if (plane.height != kStateSize || plane.width != kStateSize) {
        throw std::invalid_argument("pushed plane must be 84x84");
    }
    state.planes.erase(state.planes.begin());
    state.planes.push_back(std::move(plane));
}

double clip_reward(double r) { return std::clamp(r, -1.0, 1.0); }

PreprocessPipeline::PreprocessPipeline(int phi_length, int action_repeat, long max_frames)
    : phi_length_(phi_length), action_repeat_(action_repeat), max_frames_(max_frames) {
    if (phi_length < 1 || action_repeat < 2 || max_frames < 1) {
        throw std::invalid_argument("invalid pipeline configuration");
    }
}

void PreprocessPipeline::reset() {
    frames_seen_ = 0;
    window_filled_ = 0;
    window_reward_ = 0.0;
    lives_.reset();
    state_.reset();
}

std::optional<PreprocessPipeline::Output> PreprocessPipeline::feed(const Input& input) {
    ++frames_seen_;
    ++window_filled_;
    window_reward_ += input.reward;
    prev_frame_ = last_frame_;
    last_frame_ = input.frame;

    bool life_lost = lives_.has_value() && input.lives < *lives_;
    lives_ = input.lives;

    if (window_filled_ < action_repeat_ && !life_lost && frames_seen_ < max_frames_) {
        return std::nullopt;
    }

    const RawFrame pooled =
        window_filled_ >= 2 ? maxpool_pair(last_frame_, prev_frame_) : last_frame_;
    Plane plane = downsample(grayscale(pooled));
    if (!state_) {
        state_ = make_stacked_state(plane, phi_length_);
    } else {
        push_frame(*state_, std::move(plane));
    }

    Output out;
    out.state = *state_;
    out.clipped_reward = clip_reward(window_reward_);
    out.terminal = life_lost || frames_seen_ >= max_frames_;
    window_filled_ = 0;
    window_reward_ = 0.0;
    return out;
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

} // namespace

RawFrame load_raw_frame(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open frame fixture: " + path);
    RawFrame frame;
    frame.height = read_pod<std::int32_t>(in);
    frame.width = read_pod<std::int32_t>(in);
    if (frame.height < 1 || frame.width < 1) {
        throw std::runtime_error("malformed frame fixture: " + path);
    }
    frame.pixels.resize(static_cast<std::size_t>(frame.height) * frame.width * 3);
    in.read(reinterpret_cast<char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
    if (!in) throw std::runtime_error("truncated frame fixture: " + path);
    return frame;
}

void save_raw_frame(const RawFrame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write frame fixture: " + path);
    write_pod<std::int32_t>(out, frame.height);
    write_pod<std::int32_t>(out, frame.width);
    out.write(reinterpret_cast<const char*>(frame.pixels.data()),
              static_cast<std::streamsize>(frame.pixels.size()));
}

Plane load_plane(const std::string& path, int height, int width) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open plane fixture: " + path);
    Plane plane;
    plane.height = height;
    plane.width = width;
    plane.values.resize(static_cast<std::size_t>(height) * width);
    in.read(reinterpret_cast<char*>(plane.values.data()),
            static_cast<std::streamsize>(plane.values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated plane fixture: " + path);
    return plane;
}

void save_plane(const Plane& plane, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write plane fixture: " + path);
    out.write(reinterpret_cast<const char*>(plane.values.data()),
              static_cast<std::streamsize>(plane.values.size() * sizeof(double)));
}

} // namespace qrac::frames
