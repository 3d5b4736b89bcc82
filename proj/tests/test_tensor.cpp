#include "dipreg/tensor.hpp"

#include "gradcheck.hpp"

#include <doctest.h>

#include <stdexcept>

using namespace dipreg;

TEST_CASE("tensor shape and data invariants") {
  Tensor t = Tensor::leaf({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.shape() == Shape{2, 3});
  CHECK(t.is_leaf());
  CHECK(t.requires_grad());
  CHECK(std::string(t.op_name()) == "leaf");

  SUBCASE("data length must match the shape") {
    CHECK_THROWS_AS(Tensor::leaf({2, 3}, {1.0, 2.0}), std::invalid_argument);
  }
  SUBCASE("constants do not require grad") {
    Tensor c = Tensor::constant({2}, ArrayXd::Zero(2));
    CHECK_FALSE(c.requires_grad());
    CHECK(c.is_leaf());
  }
  SUBCASE("operation results carry provenance, leaves do not") {
    Tensor r = t + t;
    CHECK_FALSE(r.is_leaf());
    CHECK(std::string(r.op_name()) == "add");
    CHECK(r.node()->parents.size() == 2);
    CHECK(t.node()->parents.empty());
  }
}

TEST_CASE("elementwise arithmetic values") {
  Tensor a = Tensor::leaf({3}, {1, -2, 3});
  Tensor b = Tensor::leaf({3}, {4, 5, -6});
  CHECK((a + b).values()[0] == 5.0);
  CHECK((a - b).values()[1] == -7.0);
  CHECK((a * b).values()[2] == -18.0);
  CHECK((2.5 * a).values()[0] == 2.5);
  CHECK((-a).values()[1] == 2.0);
  CHECK(abs(a).values()[1] == 2.0);
  CHECK(sum(a).item() == 2.0);
  CHECK(mean(b).item() == 1.0);
  CHECK_THROWS_WITH_AS((a + Tensor::zeros({4})).item(),
                       doctest::Contains("shape mismatch"),
                       std::invalid_argument);
}

TEST_CASE("backward of a linear map gives all-ones gradient") {
  Tensor x = Tensor::leaf({4}, {1, 2, 3, 4});
  sum(x).backward();
  for (Index i = 0; i < 4; ++i) CHECK(x.grad()[i] == 1.0);
  CHECK(x.grad().size() == x.size());
}

TEST_CASE("backward of sum(x*x) at [1,2] gives [2,4]") {
  Tensor x = Tensor::leaf({2}, {1, 2});
  sum(x * x).backward();
  CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tensor x = Tensor::leaf({2}, {1, 2});
  CHECK_THROWS_AS((x * x).backward(), std::invalid_argument);
}

TEST_CASE("gradients accumulate across shared uses") {
  // Using x twice must match a duplicate-leaf construction where each
  // path owns its own copy.
  Tensor x = Tensor::leaf({2}, {0.5, -1.5});
  sum(x * x + 3.0 * x).backward();

  Tensor x1 = Tensor::leaf({2}, {0.5, -1.5});
  Tensor x2 = Tensor::leaf({2}, {0.5, -1.5});
  sum(x1 * x2 + 3.0 * x1).backward();
  // d/dx = via-x1 grad + via-x2 grad where paths are split.
  for (Index i = 0; i < 2; ++i) {
    CHECK(x.grad()[i] ==
          doctest::Approx(x1.grad()[i] + x2.grad()[i]).epsilon(1e-15));
  }
}

TEST_CASE("gradients keep accumulating until cleared") {
  Tensor x = Tensor::leaf({2}, {1, 1});
  sum(x).backward();
  sum(x).backward();
  CHECK(x.grad()[0] == 2.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("constant parents receive no gradient buffer") {
  Tensor x = Tensor::leaf({2}, {1, 2});
  Tensor c = Tensor::constant({2}, ArrayXd::Ones(2));
  sum(x * c).backward();
  CHECK(x.has_grad());
  CHECK_FALSE(c.has_grad());
}

TEST_CASE("finite differences confirm composite graph gradients") {
  Tensor a = Tensor::leaf({6}, {0.7, -1.3, 2.1, 0.4, -0.6, 1.9});
  Tensor b = Tensor::leaf({6}, {1.1, 0.8, -0.5, 2.2, 0.9, -1.7});
  auto fn = [](const std::vector<Tensor>& l) {
    return mean(abs(l[0] * l[1] - l[1])) + sum(l[0] * l[0]);
  };
  auto result = dipreg::testing::grad_check({a, b}, fn);
  CHECK(result.max_rel_err < 1e-4);
}
