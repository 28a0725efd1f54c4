#include <gtest/gtest.h>

#include "embseg/labels.hpp"

using namespace embseg;

TEST(Labels, MembersAndSizes) {
  const InstanceLabelMap m({2, 3}, {0, 1, 1, 2, 0, 1}, {0, 1});
  EXPECT_EQ(m.num_instances(), 2);
  EXPECT_EQ(m.members()[0], (std::vector<std::size_t>{1, 2, 5}));
  EXPECT_EQ(m.instance_size(2), 1u);
  EXPECT_EQ(m.class_of(2), 1);
  EXPECT_EQ(m.at(1, 0), 2);
  EXPECT_EQ(m.mask(2), (std::vector<std::uint8_t>{0, 0, 0, 1, 0, 0}));
  EXPECT_THROW(m.class_of(3), DataError);
}

TEST(Labels, BackgroundOnlyMap) {
  const InstanceLabelMap m({3, 3});
  EXPECT_EQ(m.num_instances(), 0);
  EXPECT_EQ(m.labels(), std::vector<std::int32_t>(9, 0));
}

TEST(Labels, ValidationRejectsGapsAndRanges) {
  EXPECT_THROW(InstanceLabelMap({1, 3}, {0, 2, 2}, {0, 0}), DataError);  // id 1 empty
  EXPECT_THROW(InstanceLabelMap({1, 3}, {0, 3, 1}, {0, 0}), DataError);  // out of range
  EXPECT_THROW(InstanceLabelMap({1, 3}, {0, 1}, {0}), DataError);        // wrong size
  EXPECT_THROW(InstanceLabelMap({1, 2}, {1, 0}, {-1}), DataError);       // negative class
}

TEST(Labels, CompactRelabelsInFirstAppearanceOrder) {
  const auto m = compact_labels({1, 5}, {0, 7, 3, 7, 0}, {0, 0, 0, 1, 0, 0, 0, 2});
  EXPECT_EQ(m.labels(), (std::vector<std::int32_t>{0, 1, 2, 1, 0}));
  EXPECT_EQ(m.classes(), (std::vector<int>{2, 1}));
}

TEST(Labels, HorizontalFlip) {
  const InstanceLabelMap m({2, 3}, {1, 0, 0, 1, 1, 2}, {0, 1});
  const auto f = m.flipped_horizontal();
  EXPECT_EQ(f.labels(), (std::vector<std::int32_t>{0, 0, 1, 2, 1, 1}));
  EXPECT_EQ(f.classes(), m.classes());
  EXPECT_EQ(f.flipped_horizontal(), m);
}
