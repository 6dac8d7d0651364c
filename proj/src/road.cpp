#include "optdrive/road.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "optdrive/errors.hpp"

namespace optdrive {

namespace {

Eigen::Vector2d unit(double heading) { return {std::cos(heading), std::sin(heading)}; }
Eigen::Vector2d left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

// Centerline point and tangent heading at local arclength u of a segment (u may extrapolate).
Pose along(const Pose& origin, const Segment& seg, double u) {
    Pose p;
    if (seg.curvature == 0.0) {
        p.position = origin.position + u * unit(origin.heading);
        p.heading = origin.heading;
    } else {
        const double k = seg.curvature;
        const double h = origin.heading + k * u;
        p.position = origin.position + Eigen::Vector2d((std::sin(h) - std::sin(origin.heading)) / k,
                                                       (std::cos(origin.heading) - std::cos(h)) / k);
        p.heading = h;
    }
    return p;
}

struct Candidate {
    double s_local;
    double offset;  // lateral, left positive
    double distance;
};

Candidate project_on(const Pose& origin, const Segment& seg, const Eigen::Vector2d& p, bool open_start,
                     bool open_end) {
    double u = 0.0, n = 0.0;
    if (seg.curvature == 0.0) {
        const Eigen::Vector2d r = p - origin.position;
        u = r.dot(unit(origin.heading));
        n = r.dot(left_normal(origin.heading));
    } else {
        const double k = seg.curvature;
        const double radius = 1.0 / std::abs(k);
        const Eigen::Vector2d centre = origin.position + left_normal(origin.heading) / k;
        const Eigen::Vector2d r0 = origin.position - centre;
        const Eigen::Vector2d r = p - centre;
        const double rho = r.norm();
        if (rho < 1e-9 * radius) throw AmbiguousProjection("pose at the centre of an arc segment");
        double phi = std::atan2(cross(r0, r), r0.dot(r));
        if (k < 0) phi = -phi;
        const double span = seg.length * std::abs(k);
        if (phi < -(std::numbers::pi - span / 2)) phi += 2 * std::numbers::pi;
        u = phi * radius;
        n = (k > 0 ? 1.0 : -1.0) * (radius - rho);
    }
    double clamped = u;
    if (!open_start) clamped = std::max(clamped, 0.0);
    if (!open_end) clamped = std::min(clamped, seg.length);
    const double dist = clamped == u ? std::abs(n) : (p - along(origin, seg, clamped).position).norm();
    return {u, n, dist};
}

}  // namespace

double wrap_angle(double a) {
    a = std::fmod(a + std::numbers::pi, 2 * std::numbers::pi);
    if (a < 0) a += 2 * std::numbers::pi;
    return a - std::numbers::pi;
}

Road::Road(std::vector<Segment> segments, int lane_count, double lane_width)
    : segments_(std::move(segments)), lane_count_(lane_count), lane_width_(lane_width) {
    if (lane_count_ < 1) throw std::invalid_argument("lane_count must be >= 1");
    if (!(lane_width_ > 0)) throw std::invalid_argument("lane_width must be positive");
    if (segments_.empty()) throw std::invalid_argument("road needs at least one segment");
    Pose origin;
    for (const Segment& s : segments_) {
        if (!(s.length > 0)) throw std::invalid_argument("segment length must be positive");
        if (!std::isfinite(s.curvature)) throw std::invalid_argument("segment curvature must be finite");
        if (s.curvature != 0.0 && 1.0 / std::abs(s.curvature) <= width())
            throw std::invalid_argument("arc radius must exceed the road width");
        starts_.push_back(total_length_);
        origins_.push_back(origin);
        origin = along(origin, s, s.length);
        total_length_ += s.length;
    }
}

Road Road::standard() {
    const double k = 1.0 / 400.0;
    return Road({Segment::straight(500), Segment::arc(500, k), Segment::straight(500), Segment::arc(500, -k)}, 3,
                3.5);
}

Road Road::straight(double length, int lane_count, double lane_width) {
    return Road({Segment::straight(length)}, lane_count, lane_width);
}

int Road::lane_index(double d) const {
    return std::clamp(static_cast<int>(std::floor(d / lane_width_)), 0, lane_count_ - 1);
}

double Road::wrap(double s) const {
    s = std::fmod(s, total_length_);
    if (s < 0) s += total_length_;
    if (s >= total_length_) s = 0.0;
    return s;
}

double Road::delta_s(double s_from, double s_to) const {
    double ds = wrap(s_to - s_from);
    if (ds >= total_length_ / 2) ds -= total_length_;
    return ds;
}

std::size_t Road::segment_at(double s) const {
    s = wrap(s);
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), s);
    return static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
}

double Road::curvature_at(double s) const { return segments_[segment_at(s)].curvature; }

double Road::heading_at(double s) const {
    const std::size_t i = segment_at(s);
    return along(origins_[i], segments_[i], wrap(s) - starts_[i]).heading;
}

Eigen::Vector2d Road::centerline_at(double s) const {
    const std::size_t i = segment_at(s);
    return along(origins_[i], segments_[i], wrap(s) - starts_[i]).position;
}

Pose embed(const RoadFramePose& pose, const Road& road) {
    if (!(pose.s >= 0.0 && pose.s <= road.total_length())) throw OutOfRoad("s outside [0, total_length]");
    std::size_t i = road.segment_at(pose.s);
    double u = pose.s - road.segment_start(i);
    if (pose.s == road.total_length()) {
        i = road.segments().size() - 1;
        u = road.segments()[i].length;
    }
    const Pose c = along(road.segment_origin(i), road.segments()[i], u);
    Pose out;
    out.position = c.position + (pose.d - road.width() / 2) * left_normal(c.heading);
    out.heading = wrap_angle(c.heading + pose.heading_err);
    return out;
}

RoadFramePose project(const Pose& pose, const Road& road) {
    if (!pose.position.allFinite() || !std::isfinite(pose.heading)) throw NonFiniteInput("pose");
    const auto& segs = road.segments();
    const std::size_t n = segs.size();
    std::size_t best = 0;
    Candidate best_c{0, 0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < n; ++i) {
        const Candidate c = project_on(road.segment_origin(i), segs[i], pose.position, i == 0, i + 1 == n);
        if (c.distance < best_c.distance) {
            best_c = c;
            best = i;
        }
    }
    if (best_c.distance > 2 * road.width() + road.width() / 2)
        throw AmbiguousProjection("pose too far from the centerline");
    RoadFramePose out;
    const double s = road.segment_start(best) + best_c.s_local;
    out.s = road.wrap(s);
    out.d = best_c.offset + road.width() / 2;
    const double tangent = along(road.segment_origin(best), segs[best], best_c.s_local).heading;
    out.heading_err = wrap_angle(pose.heading - tangent);
    return out;
}

LaneOffsets lane_offsets(const RoadFramePose& pose, const Road& road, double centred_tol) {
    const int lane = road.lane_index(pose.d);
    LaneOffsets c;
    c.own = road.lane_center(lane) - pose.d;
    c.left = lane + 1 < road.lane_count() ? road.lane_center(lane + 1) - pose.d : c.own;
    c.right = lane > 0 ? road.lane_center(lane - 1) - pose.d : c.own;
    c.left_primed = c.own >= centred_tol ? c.own : c.left;
    c.right_primed = c.own <= -centred_tol ? c.own : c.right;
    return c;
}

}  // namespace optdrive
