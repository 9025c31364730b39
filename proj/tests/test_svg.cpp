#include <gtest/gtest.h>

#include "uniconv/svg.hpp"

using namespace uniconv;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

svg::Plot sample_plot(svg::Style style) {
  svg::Plot p;
  p.title = "gap vs n";
  p.style = style;
  p.series.push_back({"mean", {{128, 0.3}, {256, 0.21}, {512, 0.15}, {1024, 0.11}}});
  return p;
}

}  // namespace

TEST(Svg, SinglePointGivesOneMarker) {
  svg::Plot p;
  p.series.push_back({"one", {{1.0, 2.0}}});
  const auto out = svg::render(p);
  EXPECT_EQ(count(out, "class=\"marker\""), 1u);
  EXPECT_EQ(count(out, "<polyline"), 0u);
  EXPECT_NE(out.find("</svg>"), std::string::npos);
}

TEST(Svg, LogLogRejectsNonpositive) {
  auto p = sample_plot(svg::Style::loglog);
  p.series[0].points.push_back({2048, 0.0});
  EXPECT_THROW(svg::render(p), Error);
  EXPECT_NO_THROW(svg::render(sample_plot(svg::Style::loglog)));
}

TEST(Svg, EmptyInputsRejected) {
  svg::Plot p;
  EXPECT_THROW(svg::render(p), Error);
  p.series.push_back({"empty", {}});
  EXPECT_THROW(svg::render(p), Error);
}

TEST(Svg, StepPlotSegments) {
  svg::Plot p;
  p.style = svg::Style::step;
  p.series.push_back({"residual", {{0.2, 0.1}, {0.5, -0.05}, {0.9, 0.02}}});
  const auto out = svg::render(p);
  EXPECT_EQ(count(out, "class=\"step-h\""), 4u);
  EXPECT_EQ(count(out, "class=\"step-v\""), 3u);
}

TEST(Svg, FitLegendShowsSlope) {
  auto p = sample_plot(svg::Style::loglog);
  p.fit = svg::FitLine{-0.5123, 1.0, "fit"};
  const auto out = svg::render(p);
  EXPECT_NE(out.find("fit slope = -0.512"), std::string::npos);
  EXPECT_EQ(count(out, "class=\"fit\""), 1u);
}

TEST(Svg, EscapesLabels) {
  auto p = sample_plot(svg::Style::line);
  p.title = "a<b & c";
  EXPECT_NE(svg::render(p).find("a&lt;b &amp; c"), std::string::npos);
}

TEST(Svg, DeterministicBytes) {
  auto p = sample_plot(svg::Style::loglog);
  p.fit = svg::FitLine{-0.5, 0.1, "fit"};
  EXPECT_EQ(svg::render(p), svg::render(p));
}
