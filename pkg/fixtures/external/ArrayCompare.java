public class ArrayCompare {
  public static void main(String[] args) {
    Object[] arr1 = {1, 2, 3};
    int[] arr2 = {1, 2, 3};
    int[] arr3 = {4, 5, 6};
    boolean r1 = arr1.equals(arr2);
    boolean r2 = arr1.equals(arr3);
    boolean r3 = arr1.equals(arr1);
    System.out.println(r1);
    System.out.println(r2);
    System.out.println(r3);
  }
}
