#pragma once

#include "d3net/d3net/models.hpp"
#include "d3net/d3net/pipeline.hpp"
