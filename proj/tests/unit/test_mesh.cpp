#include "chrflow/errors.hpp"
#include "chrflow/mesh.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace chr;

TEST_CASE("grid 1D spacing and weights") {
  auto g = make_grid(1, {1.0, 0.0}, {11, 0});
  CHECK(g->hx() == doctest::Approx(0.1));
  CHECK(g->quad_weights().sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g->boundary().size() == 2);
  auto gp = make_grid(1, {M_PI, 0.0}, {101, 0});
  CHECK(gp->hx() == doctest::Approx(M_PI / 100).epsilon(1e-15));
}

TEST_CASE("grid 2D boundary bookkeeping") {
  auto g = make_grid(2, {1.0, 1.0}, {11, 11});
  CHECK(g->boundary_nodes().size() == 40);
  CHECK(g->bquad_weights().sum() == doctest::Approx(4.0));
  CHECK(g->quad_weights().sum() == doctest::Approx(1.0).epsilon(1e-14));
  int corners = 0;
  for (std::size_t k : g->boundary_nodes()) {
    int faces = 0;
    for (const auto& e : g->boundary()) faces += e.node == k;
    CHECK((faces == 1 || faces == 2));
    corners += faces == 2;
  }
  CHECK(corners == 4);
}

TEST_CASE("grid rejects bad input") {
  CHECK_THROWS_AS(make_grid(1, {1.0, 0.0}, {4, 0}), InvalidArgument);
  CHECK_THROWS_AS(make_grid(1, {0.0, 0.0}, {11, 0}), InvalidArgument);
  CHECK_THROWS_AS(make_grid(2, {1.0, -1.0}, {11, 11}), InvalidArgument);
  CHECK_THROWS_AS(make_grid(3, {1.0, 1.0}, {11, 11}), InvalidArgument);
}

TEST_CASE("integrate and boundary_integrate") {
  auto g = make_grid(1, {1.0, 0.0}, {11, 0});
  CHECK(integrate(sample(g, [](double, double) { return 1.0; })) == doctest::Approx(1.0));
  CHECK(integrate(sample(g, [](double x, double) { return x; })) == doctest::Approx(0.5));
  CHECK(boundary_integrate(sample(g, [](double x, double) { return x; })) == doctest::Approx(1.0));
  auto gpi = make_grid(1, {M_PI, 0.0}, {101, 0});
  CHECK(std::abs(integrate(sample(gpi, [](double x, double) { return std::cos(x); }))) < 1e-3);

  auto g2 = make_grid(2, {1.0, 1.0}, {11, 11});
  CHECK(boundary_integrate(sample(g2, [](double, double) { return 1.0; })) == doctest::Approx(4.0));
  CHECK(boundary_integrate(sample(g2, [](double x, double) { return x; })) == doctest::Approx(2.0));
  // exact for affine fields
  CHECK(integrate(sample(g2, [](double x, double y) { return 2 * x - y + 3; })) ==
        doctest::Approx(3.5).epsilon(1e-14));
}

TEST_CASE("field construction invariants") {
  auto g = make_grid(1, {1.0, 0.0}, {6, 0});
  CHECK_THROWS_AS(Field(g, Eigen::VectorXd::Zero(5)), InvalidArgument);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(6);
  bad[2] = NAN;
  CHECK_THROWS_AS(Field(g, bad), InvalidArgument);
  Field v(g, Eigen::VectorXd::LinSpaced(12, 0, 11), 2);
  CHECK(v.component(1)[0] == 6.0);
}

TEST_CASE("field csv export") {
  auto g = make_grid(2, {1.0, 2.0}, {5, 5});
  std::ostringstream os;
  write_field_csv(os, sample(g, [](double x, double y) { return x + y; }));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "# grid dim=2 nx=5 ny=5 Lx=1 Ly=2");
  std::getline(is, line);
  CHECK(line == "0,0,0,0,0");
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 25);
}
