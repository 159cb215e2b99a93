#include <cstdio>
#include <cstring>

#include "toy/bit_set.hpp"
#include "toy/code_printer.hpp"
#include "toy/grid.hpp"
#include "toy/histogram.hpp"
#include "toy/id_allocator.hpp"
#include "toy/inventory.hpp"
#include "toy/layout_box.hpp"
#include "toy/rate_limiter.hpp"
#include "toy/ring_buffer.hpp"
#include "toy/running_stats.hpp"
#include "toy/text_scanner.hpp"
#include "toy/vec2.hpp"
#include "toy/word_counter.hpp"

namespace {

int failures = 0;

void expectEqual(long actual, long expected, const char* what) {
  if (actual != expected) {
    std::printf("FAIL %s: expected %ld, got %ld\n", what, expected, actual);
    failures++;
  }
}

void expectText(const toy::OutputBuffer& out, const char* expected, const char* what) {
  if (!out.equals(expected)) {
    std::printf("FAIL %s: expected \"%s\", got \"%s\"\n", what, expected, out.str());
    failures++;
  }
}

void testPrinter() {
  using toy::Node;
  using toy::NodeKind;
  Node x = Node::leaf(NodeKind::NAME, "x");
  Node a = Node::leaf(NodeKind::NAME, "a");
  Node b = Node::leaf(NodeKind::NAME, "b");
  Node c = Node::leaf(NodeKind::NAME, "c");
  Node d = Node::leaf(NodeKind::NAME, "d");
  Node in = Node::binary(NodeKind::IN, &b, &c);
  Node hook = Node::hook(&a, &in, &d);
  Node assign = Node::binary(NodeKind::ASSIGN, &x, &hook);
  {
    toy::OutputBuffer out;
    toy::CodePrinter printer(out);
    printer.printForInit(&assign);
    expectText(out, "for(x=a?(b in c):d;;)", "hook in for-init");
  }
  {
    Node direct = Node::binary(NodeKind::ASSIGN, &x, &in);
    toy::OutputBuffer out;
    toy::CodePrinter printer(out);
    printer.printForInit(&direct);
    expectText(out, "for(x=(b in c);;)", "in for-init");
  }
  {
    Node obj = Node::leaf(NodeKind::OBJECTLIT, "");
    toy::OutputBuffer out;
    toy::CodePrinter printer(out);
    printer.printStatement(&obj);
    expectText(out, "({});", "object statement");
  }
}

void testInventory() {
  toy::Inventory inventory;
  inventory.add(toy::Item(100, 2, true));
  inventory.add(toy::Item(30, 1, false));
  expectEqual(inventory.rawWeight(), 230, "raw weight");
  expectEqual(inventory.shippingWeight(), 330, "shipping weight");
}

void testScanner() {
  toy::TextScanner scanner("alpha  be gamma", ' ');
  expectEqual(scanner.countWords(), 3, "word count");
  expectEqual(scanner.longestWord(), 5, "longest word");
  expectEqual(scanner.wordLength(1), 2, "second word");
}

void testRing() {
  toy::RingBuffer ring;
  ring.push(4);
  ring.push(6);
  ring.fillSentinel(5);
  expectEqual(ring.checksum(), 15, "checksum with sentinel");
  int value = 0;
  ring.pop(value);
  expectEqual(value, 4, "fifo order");
}

void testLayout() {
  toy::LayoutBox box(10, 20, toy::Insets{1, 2, 3, 4}, 1);
  expectEqual(box.outerWidth(), 18, "outer width");
  expectEqual(box.outerHeight(), 26, "outer height");
  expectEqual(box.innerWidth(), 16, "inner width");
  expectEqual(box.innerHeight(), 24, "inner height");
}

void testLimiter() {
  toy::RateLimiter limiter(0);
  expectEqual(limiter.capacity(), 1, "floor limit");
  limiter.resize(500);
  expectEqual(limiter.capacity(), 100, "ceiling on resize");
  expectEqual(limiter.tryAcquire() ? 1 : 0, 1, "acquire");
}

void testHelpers() {
  toy::RunningStats stats;
  stats.record(3);
  stats.record(9);
  expectEqual(stats.spread(), 6, "spread");
  toy::Grid grid;
  grid.set(1, 1, 7);
  expectEqual(grid.trace(), 7, "trace");
}

}  // namespace

void testUtilities() {
  toy::Vec2 a{3, -4};
  toy::Vec2 b{1, 2};
  expectEqual(a.plus(b).manhattanLength(), 6, "vec2 sum length");
  expectEqual(a.dot(b), -5, "vec2 dot");

  toy::Histogram h(0, 10);
  h.add(5);
  h.add(15);
  h.add(17);
  h.add(200);
  expectEqual(h.busiestBucket(), 1, "histogram busiest");
  expectEqual(h.outliers(), 1, "histogram outliers");

  toy::IdAllocator ids;
  int first = ids.acquire();
  ids.acquire();
  ids.release(first);
  expectEqual(ids.acquire(), first, "id recycled");
  expectEqual(ids.liveCount(), 2, "live ids");

  toy::BitSet set;
  set.insert(3);
  set.insert(9);
  set.erase(3);
  expectEqual(set.size(), 1, "bitset size");
  expectEqual(set.contains(9) ? 1 : 0, 1, "bitset contains");

  toy::WordCounter words;
  words.add("alpha");
  words.add("beta");
  words.add("alpha");
  expectEqual(words.countOf("alpha"), 2, "word count");
  expectEqual(words.distinct(), 2, "distinct words");
}

int main() {
  testPrinter();
  testInventory();
  testScanner();
  testRing();
  testLayout();
  testLimiter();
  testHelpers();
  testUtilities();
  if (failures != 0) {
    std::printf("%d failure(s)\n", failures);
    return 1;
  }
  std::printf("all passed\n");
  return 0;
}
