#pragma once

#include <Eigen/Core>
#include <vector>

namespace optdrive {

// One piece of centerline. Straight pieces have zero curvature; positive curvature turns left.
struct Segment {
    double length = 0.0;
    double curvature = 0.0;

    static Segment straight(double length) { return {length, 0.0}; }
    static Segment arc(double length, double curvature) { return {length, curvature}; }
};

// Global planar pose.
struct Pose {
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    double heading = 0.0;
};

// s: arclength along the centerline, d: lateral offset from the right road edge.
struct RoadFramePose {
    double s = 0.0;
    double d = 0.0;
    double heading_err = 0.0;
};

// Offsets from the vehicle to lane centers, positive to the left.
struct LaneOffsets {
    double right = 0.0;        // c_{-1}
    double own = 0.0;          // c_0
    double left = 0.0;         // c_{+1}
    double right_primed = 0.0; // c'_{-1}
    double left_primed = 0.0;  // c'_{+1}
};

// Immutable highway description. The longitudinal coordinate wraps modulo total_length.
class Road {
public:
    Road(std::vector<Segment> segments, int lane_count, double lane_width);

    // 3 lanes of 3.5 m, 500 m straights alternating with 500 m arcs of radius 400 m.
    static Road standard();
    static Road straight(double length, int lane_count = 3, double lane_width = 3.5);

    const std::vector<Segment>& segments() const { return segments_; }
    int lane_count() const { return lane_count_; }
    double lane_width() const { return lane_width_; }
    double width() const { return lane_count_ * lane_width_; }
    double total_length() const { return total_length_; }

    double lane_center(int lane) const { return (lane + 0.5) * lane_width_; }
    int lane_index(double d) const;

    // Wrap into [0, total_length).
    double wrap(double s) const;
    // Signed shortest longitudinal distance from s_from to s_to on the loop.
    double delta_s(double s_from, double s_to) const;

    double curvature_at(double s) const;
    double heading_at(double s) const;
    Eigen::Vector2d centerline_at(double s) const;

    // Index of the segment containing wrapped s.
    std::size_t segment_at(double s) const;
    double segment_start(std::size_t i) const { return starts_[i]; }
    const Pose& segment_origin(std::size_t i) const { return origins_[i]; }

private:
    std::vector<Segment> segments_;
    int lane_count_;
    double lane_width_;
    double total_length_ = 0.0;
    std::vector<double> starts_;
    std::vector<Pose> origins_;
};

Pose embed(const RoadFramePose& pose, const Road& road);
RoadFramePose project(const Pose& pose, const Road& road);

// Primed offsets treat the own lane center as "the next one" in a direction only when it lies
// at least centred_tol away on that side. Must stay below the lane-change tolerance, otherwise the
// target of a lane change into an inner lane jumps one lane further before it can terminate.
LaneOffsets lane_offsets(const RoadFramePose& pose, const Road& road, double centred_tol = 0.025);

double wrap_angle(double a);

}  // namespace optdrive
