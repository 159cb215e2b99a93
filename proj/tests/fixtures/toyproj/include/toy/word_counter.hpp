#pragma once

#include <cstring>

namespace toy {

// Counts occurrences of up to kSlots distinct short words.
class WordCounter {
 public:
  static const int kSlots = 16;
  static const int kWordLength = 16;

  WordCounter() : used(0) {}

  void add(const char* word) {
    int slot = find(word);
    if (slot < 0) {
      if (used >= kSlots) {
        return;
      }
      slot = used++;
      std::strncpy(words[slot], word, kWordLength - 1);
      words[slot][kWordLength - 1] = '\0';
      counts[slot] = 0;
    }
    counts[slot]++;
  }

  int countOf(const char* word) const {
    int slot = find(word);
    return slot < 0 ? 0 : counts[slot];
  }

  int distinct() const { return used; }

 private:
  int find(const char* word) const {
    for (int slot = 0; slot < used; slot++) {
      if (std::strncmp(words[slot], word, kWordLength - 1) == 0) {
        return slot;
      }
    }
    return -1;
  }

  int used;
  char words[kSlots][kWordLength];
  int counts[kSlots];
};

}  // namespace toy
