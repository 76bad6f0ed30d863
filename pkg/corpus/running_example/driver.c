/* Test driver for the pricing corpus.  Exercises the discount scenarios the
 * suite covers and seeds boundary inputs for the discount helper.  Lives
 * outside the versioned trees: it drives the instrumented code but is not
 * part of the analyzed program. */

int getTotalPrice(int price, int quantity);
int getDiscountedPrice(int price, int discount);
int getSaving(int price, int quantity, int discount);

int main(void) {
    getSaving(500, 2, 1);
    getSaving(800, 1, 2);
    getSaving(1500, 2, 20);
    getSaving(700, 5, 10);
    getSaving(1000, 8, 25);
    getSaving(900, 3, 5);

    getDiscountedPrice(400, 25);
    getDiscountedPrice(9000, 1);
    getDiscountedPrice(2000, 10);
    return 0;
}
