// Action of D4 on s x s filter patches carrying a fiber representation.
//
// Patch vectors are channel-major: index = k * s^2 + a * s + b, where (a, b)
// is the row/column inside the patch and the spatial offset is (a - c, b - c)
// with c = (s - 1) / 2, so the patch center is fixed by every h.

#pragma once

#include "equisteer/intertwiner.hpp"

namespace equisteer {

inline int patch_center(int s) { return (s - 1) / 2; }

inline void require_odd_patch(int s) {
  if (s < 1 || s % 2 == 0) throw InvalidArgument("patch size must be odd and positive, got " + std::to_string(s));
}

inline std::vector<Point> patch_offsets(int s) {
  require_odd_patch(s);
  const int c = patch_center(s);
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(s * s));
  for (int a = 0; a < s; ++a)
    for (int b = 0; b < s; ++b) out.push_back({a - c, b - c});
  return out;
}

inline int patch_position(Point offset, int s) {
  const int c = patch_center(s);
  return (offset[0] + c) * s + (offset[1] + c);
}

// Spatial permutation [P(h) v](x) = v(h^-1 x) on the s^2 patch positions.
inline Matrix patch_permutation(Dihedral h, int s) {
  const auto offsets = patch_offsets(s);
  const int n = s * s;
  Matrix p = Matrix::Zero(n, n);
  for (int x = 0; x < n; ++x) p(x, patch_position(h.inverse().apply(offsets[static_cast<std::size_t>(x)]), s)) = 1;
  return p;
}

struct PatchRep {
  int size = 1;
  Representation fiber;
  Representation rep;

  int dim() const { return rep.dim(); }
};

// [pi(h) P](x) = rho(h) P(h^-1 x), i.e. pi(h) = rho(h) kron P(h) in channel-major layout.
inline PatchRep build_patch_rep(const Representation& fiber, int s) {
  require_odd_patch(s);
  std::array<Matrix, 8> mats;
  for (const Dihedral h : d4_elements()) mats[static_cast<std::size_t>(h.index())] = kron(fiber(h), patch_permutation(h, s));
  std::string name = "patch(" + fiber.name() + "," + std::to_string(s) + "x" + std::to_string(s) + ")";
  return {s, fiber, Representation(std::move(name), std::move(mats))};
}

// Pixel permutation on s x s patches, repeated for each channel.
inline PatchRep build_pi0(int s, int channels) {
  require_odd_patch(s);
  if (channels < 1) throw InvalidArgument("build_pi0 needs at least one channel");
  PatchRep p = build_patch_rep(trivial_rep(channels, "A1^" + std::to_string(channels)), s);
  return p;
}

}  // namespace equisteer
