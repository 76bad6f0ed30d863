/* Order pricing: total price with sales tax, discount application, and the
 * saving obtained for a priced quantity of items.  Prices are in cents. */
#include "trace.h"

int getTotalPrice(int price, int quantity) {
    int inv = trace_enter("getTotalPrice");
    trace_int("price", price);
    trace_int("quantity", quantity);
    trace_end();

    /* *** BEGIN CHANGE *** */
    int items = price * quantity;
    int total = items;
    int taxes = items / 10;
    if (quantity > 0) {
        total = total + taxes;
    }
    /* *** END CHANGE *** */

    trace_exit("getTotalPrice", inv);
    trace_int("return", total);
    trace_int("price", price);
    trace_int("quantity", quantity);
    trace_end();
    return total;
}

int getDiscountedPrice(int price, int discount) {
    int inv = trace_enter("getDiscountedPrice");
    trace_int("price", price);
    trace_int("discount", discount);
    trace_end();

    int rebate = (price * discount) / 100;
    int result = price - rebate;

    trace_exit("getDiscountedPrice", inv);
    trace_int("return", result);
    trace_int("price", price);
    trace_int("discount", discount);
    trace_end();
    return result;
}

int getSaving(int price, int quantity, int discount) {
    int inv = trace_enter("getSaving");
    trace_int("price", price);
    trace_int("quantity", quantity);
    trace_int("discount", discount);
    trace_end();

    /* *** BEGIN CHANGE *** */
    if (quantity <= 0) {
        return 0;
    }
    /* *** END CHANGE *** */

    int totalPrice = getTotalPrice(price, quantity);
    int discountedPrice = getDiscountedPrice(totalPrice, discount);
    int saving = totalPrice - discountedPrice;

    trace_exit("getSaving", inv);
    trace_int("return", saving);
    trace_int("price", price);
    trace_int("quantity", quantity);
    trace_int("discount", discount);
    trace_end();
    return saving;
}
