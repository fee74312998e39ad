// Copyright 2026 The incseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "incseg/segmap_io.h"

#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "incseg/errors.h"
#include "incseg/rng.h"
#include "test_util.h"

namespace incseg {
namespace {

TEST(InstanceMapIoTest, WritesTheDocumentedLayout) {
  std::ostringstream out;
  WriteInstanceMap(out, testing::MapFromRows({"120", "003"}));
  EXPECT_EQ(out.str(), "IMAP 3 2\n1 2 0\n0 0 3\n");
}

TEST(InstanceMapIoTest, RoundTrip) {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const InstanceMap map = testing::RandomRectMap(9, 7, 6, rng);
    std::stringstream s;
    WriteInstanceMap(s, map);
    EXPECT_EQ(ReadInstanceMap(s), map);
  }
}

TEST(InstanceMapIoTest, RejectsMalformedInput) {
  for (const std::string text :
       {"", "IMAP 2\n", "IMAP 2 1\n1\n", "IMAP 2 1\n1 x\n", "IMAP 2 1\n1 -2\n",
        "IMAP 2 1\n1 2\nextra\n", "CMAP 2 1\n1 2\n", "IMAP 0 1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(ReadInstanceMap(in), DataError) << text;
  }
}

TEST(InstanceMapIoTest, ToleratesCrLfAndTrailingBlankLines) {
  std::istringstream in("IMAP 2 1\r\n4 0\r\n\n");
  EXPECT_EQ(ReadInstanceMap(in), InstanceMap(2, 1, {4, 0}));
}

TEST(ClusteringMapIoTest, RoundTripWithinSixDecimals) {
  ClusteringMap cmap(3, 2, 2);
  for (int i = 0; i < cmap.pixel_count(); ++i) {
    auto px = cmap.mutable_pixel(i);
    px[0] = 1.0 / 3.0;
    px[1] = 1.0 / 7.0;
    px[2] = 1.0 - px[0] - px[1];
  }
  std::stringstream s;
  WriteClusteringMap(s, cmap);
  const ClusteringMap back = ReadClusteringMap(s);
  ASSERT_EQ(back.width(), 3);
  ASSERT_EQ(back.layer_count(), 2);
  for (std::size_t i = 0; i < cmap.probs().size(); ++i) {
    EXPECT_NEAR(back.probs()[i], cmap.probs()[i], 1e-6);
  }
  EXPECT_NO_THROW(back.Validate(1e-9));
}

TEST(ClusteringMapIoTest, RejectsWrongBlockCount) {
  std::istringstream in("CMAP 1 1 2\n0.5\n0.5\n");
  EXPECT_THROW(ReadClusteringMap(in), DataError);
}

TEST(ClusteringMapIoTest, RejectsNonNormalizedPixel) {
  std::istringstream in("CMAP 1 1 1\n0.5\n0.6\n");
  EXPECT_THROW(ReadClusteringMap(in), DataError);
}

}  // namespace
}  // namespace incseg
