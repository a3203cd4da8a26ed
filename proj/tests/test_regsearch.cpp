#include <doctest.h>

#include <cmath>

#include "bowslab/error.hpp"
#include "bowslab/fixtures.hpp"
#include "bowslab/regsearch.hpp"

using namespace bowslab;

TEST_CASE("grid string parsing") {
  const SearchGrid g = SearchGrid::parse("dx=-2..2:1,dy=0..4:2,contrast=0.9..1.1:0.1,scale=1");
  CHECK(g.dx.values() == std::vector<int>{-2, -1, 0, 1, 2});
  CHECK(g.dy.values() == std::vector<int>{0, 2, 4});
  CHECK(g.contrast.values().size() == 3);
  CHECK(g.scale.values() == std::vector<double>{1.0});
  CHECK(g.cell_count() == 5 * 3 * 3 * 1);
  const SearchGrid back = SearchGrid::parse(g.to_string());
  CHECK(back.cell_count() == g.cell_count());
  CHECK(back.min_overlap == g.min_overlap);

  CHECK_THROWS_AS(SearchGrid::parse("dx=1..0:1"), ValidationError);
  CHECK_THROWS_AS(SearchGrid::parse("dz=1"), ValidationError);
  CHECK_THROWS_AS(SearchGrid::parse("dx=a..b"), ValidationError);
  CHECK_THROWS_AS(SearchGrid::parse("contrast=0..1:0.5"), ValidationError);
}

TEST_CASE("render_candidate: identity and integer shifts") {
  const Pixmap src = fixture(0, 64);
  const Rendered id = render_candidate(src, {}, 64, 64);
  CHECK(id.image == src);
  CHECK(id.valid_count == 64 * 64);

  const Rendered sh = render_candidate(src, {3, -2, 1.0, 1.0}, 64, 64);
  CHECK(sh.valid_count == 61 * 62);
  CHECK(sh.image.at(3, 0) == src.at(0, 2));
  CHECK(sh.image.at(10, 20) == src.at(7, 22));
  CHECK(sh.valid[0] == 0);
  CHECK(sh.image.at(0, 0) == 0);
}

TEST_CASE("render_candidate: contrast rounds and clips, scale interpolates") {
  Pixmap src(4, 1, std::vector<std::uint8_t>{10, 20, 200, 250});
  const Rendered c = render_candidate(src, {0, 0, 1.25, 1.0}, 4, 1);
  CHECK(c.image.at(0, 0) == 12);  // 12.5 rounds to even
  CHECK(c.image.at(1, 0) == 25);
  CHECK(c.image.at(3, 0) == 255);

  // Scale 2: output x samples source x / 2, halfway points average neighbours.
  const Rendered s = render_candidate(src, {0, 0, 1.0, 2.0}, 7, 1);
  CHECK(s.image.at(1, 0) == 15);
  CHECK(s.image.at(6, 0) == 250);
  CHECK(s.valid_count == 7);

  CHECK_THROWS_AS(render_candidate(src, {100, 0, 1.0, 1.0}, 4, 1), DimensionError);
  CHECK_THROWS_AS(render_candidate(src, {0, 0, 0.0, 1.0}, 4, 1), ValidationError);
}

TEST_CASE("masked_psnr only counts valid pixels") {
  const Pixmap src = fixture(1, 32);
  const Rendered r = render_candidate(src, {4, 4, 1.0, 1.0}, 32, 32);
  Pixmap target = r.image;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 32; ++x) target.at(x, y) = static_cast<std::uint8_t>(255 - target.at(x, y));
  const QualityReport q = masked_psnr(r, target);
  CHECK(q.infinite());
  CHECK(q.sample_count == 28 * 28);
}

TEST_CASE("grid search recovers a planted registration") {
  const Pixmap src = fixture(2, 64);
  const RegistrationParams planted{2, -3, 1.1, 0.95};
  const Pixmap target = render_candidate(src, planted, 64, 64).image;
  const SearchGrid g = SearchGrid::parse("dx=-4..4:1,dy=-4..4:1,contrast=0.9..1.2:0.05,scale=0.9..1.1:0.05");
  const RegistrationResult r = grid_search(src, target, g);
  CHECK(r.params.dx == planted.dx);
  CHECK(r.params.dy == planted.dy);
  CHECK(r.params.contrast == doctest::Approx(planted.contrast));
  CHECK(r.params.scale == doctest::Approx(planted.scale));
  CHECK(r.quality.infinite());
  CHECK(r.cells_evaluated <= g.cell_count());
}

TEST_CASE("ties break toward the lexicographically smallest cell") {
  const Pixmap flat(32, 32, 90);
  const SearchGrid g = SearchGrid::parse("dx=-2..2:1,dy=-2..2:1,contrast=1,scale=1");
  const RegistrationResult r = grid_search(flat, flat, g);
  CHECK(r.params == RegistrationParams{-2, -2, 1.0, 1.0});
  CHECK(lexicographically_less({-2, 5, 1, 1}, {-1, -5, 1, 1}));
  CHECK_FALSE(lexicographically_less({0, 0, 1, 1}, {0, 0, 1, 1}));
}

TEST_CASE("cells below the overlap floor are skipped") {
  const Pixmap src = fixture(3, 32);
  SearchGrid g = SearchGrid::parse("dx=0..30:30,dy=0,contrast=1,scale=1");
  g.min_overlap = 0.5;
  const RegistrationResult r = grid_search(src, src, g);
  CHECK(r.params.dx == 0);
  CHECK(r.cells_evaluated == 1);
  g.dx = {30, 30, 1};
  CHECK_THROWS_AS(grid_search(src, src, g), DimensionError);
}

TEST_CASE("refinement never loses PSNR and lands near an off-grid plant") {
  const Pixmap src = fixture(4, 128);
  const RegistrationParams planted{1, 1, 1.03, 0.97};
  const Pixmap target = render_candidate(src, planted, 128, 128).image;
  const SearchGrid g = SearchGrid::parse("dx=-2..2:2,dy=-2..2:2,contrast=0.9..1.1:0.1,scale=0.9..1.1:0.1");
  const RegistrationResult coarse = grid_search(src, target, g);
  const RefineResult fine = refine(src, target, g, coarse, RefineOptions{4, 2});
  REQUIRE(fine.round_psnr.size() == 5);
  for (std::size_t i = 1; i < fine.round_psnr.size(); ++i) CHECK(fine.round_psnr[i] >= fine.round_psnr[i - 1]);
  CHECK(fine.best.params.dx == 1);
  CHECK(fine.best.params.dy == 1);
  CHECK(std::abs(fine.best.params.contrast - planted.contrast) <= fine.final_grid.contrast.step);
  CHECK(std::abs(fine.best.params.scale - planted.scale) <= fine.final_grid.scale.step);
  CHECK(fine.final_grid.dx.step == 1);
  CHECK(fine.final_grid.contrast.step == doctest::Approx(0.1 / 16));
}
