#pragma once

#include "lpmkl/bounds.hpp"
#include "lpmkl/error.hpp"
#include "lpmkl/kernel.hpp"
#include "lpmkl/kernel_io.hpp"
#include "lpmkl/mkl.hpp"
#include "lpmkl/model_io.hpp"
#include "lpmkl/rng.hpp"
#include "lpmkl/svm.hpp"
#include "lpmkl/sweep.hpp"
#include "lpmkl/theta.hpp"
#include "lpmkl/toy.hpp"
