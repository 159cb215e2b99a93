#pragma once

namespace toy {

// Integer 2D vector.
struct Vec2 {
  int x;
  int y;

  Vec2 plus(const Vec2& other) const { return Vec2{x + other.x, y + other.y}; }
  Vec2 minus(const Vec2& other) const { return Vec2{x - other.x, y - other.y}; }
  Vec2 scaled(int factor) const { return Vec2{x * factor, y * factor}; }

  int dot(const Vec2& other) const { return x * other.x + y * other.y; }

  int manhattanLength() const {
    int ax = x < 0 ? -x : x;
    int ay = y < 0 ? -y : y;
    return ax + ay;
  }

  bool equals(const Vec2& other) const { return x == other.x && y == other.y; }
};

}  // namespace toy
