int fact(int n) {
  int result = 1;
  if (n > 0)
    result = n * fact(n - 1);
  return result;
}

int main() {
  return fact(5);
}
