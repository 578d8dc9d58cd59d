#include "gana/training.hpp"
int main() { return 0; }
